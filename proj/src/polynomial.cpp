#include "foliate/polynomial.hpp"

#include <map>
#include <mutex>

namespace foliate {

namespace {

constexpr int kBitsPerVar = 6;
constexpr int kMaxVars = 64 / kBitsPerVar;
constexpr int kTableLimit = 1500;

// All exponent tuples of total degree d in nvars variables, first variable
// highest first.
void enumerate_degree(int nvars, int d, std::vector<int>& cur, int v, std::vector<int>& out) {
  if (v == nvars - 1) {
    cur[v] = d;
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int e = d; e >= 0; --e) {
    cur[v] = e;
    enumerate_degree(nvars, d - e, cur, v + 1, out);
  }
}

}  // namespace

MonomialSet::MonomialSet(int nvars, int maxdeg) : nvars_(nvars), maxdeg_(maxdeg) {
  if (nvars < 1 || nvars > kMaxVars)
    throw ValidationError("monomial set: variable count out of range");
  if (maxdeg < 0 || maxdeg >= (1 << kBitsPerVar))
    throw ValidationError("monomial set: degree out of range");
  std::vector<int> cur(nvars, 0);
  offsets_.push_back(0);
  for (int d = 0; d <= maxdeg; ++d) {
    enumerate_degree(nvars, d, cur, 0, exps_);
    offsets_.push_back(static_cast<int>(exps_.size() / nvars));
  }
  const int n = offsets_.back();
  degree_.resize(n);
  for (int d = 0; d <= maxdeg; ++d)
    for (int m = offsets_[d]; m < offsets_[d + 1]; ++m) degree_[m] = d;
  lookup_.reserve(n);
  for (int m = 0; m < n; ++m) lookup_.emplace(key(exponents(m)), m);

  pred_.assign(n, -1);
  last_.assign(n, -1);
  lower_.assign(static_cast<std::size_t>(n) * nvars, -1);
  std::vector<int> e(nvars);
  for (int m = 1; m < n; ++m) {
    const auto em = exponents(m);
    std::copy(em.begin(), em.end(), e.begin());
    for (int v = 0; v < nvars; ++v) {
      if (e[v] == 0) continue;
      --e[v];
      lower_[static_cast<std::size_t>(m) * nvars + v] = index(e);
      ++e[v];
    }
    for (int v = nvars - 1; v >= 0; --v) {
      if (e[v] > 0) {
        last_[m] = v;
        pred_[m] = lower(m, v);
        break;
      }
    }
  }

  if (n <= kTableLimit) {
    table_.assign(static_cast<std::size_t>(n) * n, -1);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (degree_[a] + degree_[b] > maxdeg) continue;
        const auto ea = exponents(a), eb = exponents(b);
        for (int v = 0; v < nvars; ++v) e[v] = ea[v] + eb[v];
        table_[static_cast<std::size_t>(a) * n + b] = index(e);
      }
    }
  }
}

std::uint64_t MonomialSet::key(std::span<const int> e) const {
  std::uint64_t k = 0;
  for (int v = 0; v < nvars_; ++v) k |= static_cast<std::uint64_t>(e[v]) << (kBitsPerVar * v);
  return k;
}

int MonomialSet::index(std::span<const int> e) const {
  int d = 0;
  for (int v = 0; v < nvars_; ++v) {
    if (e[v] < 0) return -1;
    d += e[v];
  }
  if (d > maxdeg_) return -1;
  const auto it = lookup_.find(key(e));
  return it == lookup_.end() ? -1 : it->second;
}

int MonomialSet::product(int a, int b) const {
  if (!table_.empty()) return table_[static_cast<std::size_t>(a) * size() + b];
  if (degree_[a] + degree_[b] > maxdeg_) return -1;
  // exponents add, so the packed keys add
  const auto it = lookup_.find(key(exponents(a)) + key(exponents(b)));
  return it == lookup_.end() ? -1 : it->second;
}

std::shared_ptr<const MonomialSet> monomials(int nvars, int maxdeg) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const MonomialSet>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{nvars, maxdeg}];
  if (!slot) slot = std::make_shared<const MonomialSet>(nvars, maxdeg);
  return slot;
}

}  // namespace foliate
