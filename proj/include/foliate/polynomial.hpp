#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "foliate/error.hpp"
#include "foliate/fourier.hpp"

namespace foliate {

/// All monomials of total degree 0..maxdeg in nvars variables, graded
/// lexicographic order (degree ascending, then exponent tuples descending).
class MonomialSet {
 public:
  MonomialSet(int nvars, int maxdeg);

  int nvars() const { return nvars_; }
  int max_degree() const { return maxdeg_; }
  int size() const { return static_cast<int>(degree_.size()); }

  std::span<const int> exponents(int m) const {
    return {exps_.data() + static_cast<std::size_t>(m) * nvars_,
            static_cast<std::size_t>(nvars_)};
  }
  int degree(int m) const { return degree_[m]; }
  /// First index of the monomials of degree d; degree_begin(maxdeg+1) == size().
  int degree_begin(int d) const { return offsets_[d]; }
  int degree_end(int d) const { return offsets_[d + 1]; }

  /// Index of the monomial with the given exponents, −1 when absent.
  int index(std::span<const int> e) const;
  /// m = predecessor(m) · x_{last_var(m)}; undefined for the constant.
  int predecessor(int m) const { return pred_[m]; }
  int last_var(int m) const { return last_[m]; }
  /// Index of the product monomial, −1 when its degree exceeds maxdeg.
  int product(int a, int b) const;
  /// Index of the monomial with exponent of variable v lowered by one
  /// (−1 if that exponent is zero).
  int lower(int m, int v) const { return lower_[static_cast<std::size_t>(m) * nvars_ + v]; }

  /// φ_m(x) for every monomial.
  template <class Vec, class Out>
  void evaluate(const Vec& x, Out& phi) const {
    phi(0) = 1;
    for (int m = 1; m < size(); ++m) phi(m) = phi(pred_[m]) * x(last_[m]);
  }

  /// ∂φ_m/∂x_v, stored as size() × nvars.
  template <class Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gradient(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& phi) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(size(), nvars_);
    for (int m = 1; m < size(); ++m) {
      const auto e = exponents(m);
      for (int v = 0; v < nvars_; ++v)
        if (e[v] > 0) d(m, v) = Scalar(double(e[v])) * phi(lower(m, v));
    }
    return d;
  }

 private:
  std::uint64_t key(std::span<const int> e) const;

  int nvars_, maxdeg_;
  std::vector<int> exps_;
  std::vector<int> degree_;
  std::vector<int> offsets_;
  std::vector<int> pred_, last_, lower_;
  std::unordered_map<std::uint64_t, int> lookup_;
  std::vector<int> table_;  // dense product table for small sets
};

/// Shared, cached monomial set.
std::shared_ptr<const MonomialSet> monomials(int nvars, int maxdeg);

/// Polynomial map ℝ^nvars × 𝕋 → ℝ^nout (or ℂ) stored by its coefficient
/// matrices (nout × monomials) at each collocation node.
template <class Scalar>
struct TorusPoly {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::shared_ptr<const MonomialSet> basis;
  CollocationGrid grid;
  int nout = 0;
  std::vector<Mat> coeffs;

  TorusPoly() = default;
  TorusPoly(int nout_, int nvars, int maxdeg, const CollocationGrid& g)
      : basis(monomials(nvars, maxdeg)), grid(g), nout(nout_) {
    coeffs.assign(g.size(), Mat::Zero(nout_, basis->size()));
  }

  int nvars() const { return basis->nvars(); }
  int max_degree() const { return basis->max_degree(); }
  int nmon() const { return basis->size(); }
  int nodes() const { return grid.size(); }

  Vec eval_node(int j, const Vec& x) const {
    Vec phi(nmon());
    basis->evaluate(x, phi);
    return coeffs[j] * phi;
  }

  /// Value at an arbitrary phase through the cardinal interpolation.
  Vec eval(const Vec& x, double theta) const {
    Vec phi(nmon());
    basis->evaluate(x, phi);
    const Eigen::VectorXd t = interpolation_weights(grid, theta);
    Vec out = Vec::Zero(nout);
    for (int j = 0; j < nodes(); ++j) out += Scalar(t(j)) * (coeffs[j] * phi);
    return out;
  }

  Mat jacobian_node(int j, const Vec& x) const {
    Vec phi(nmon());
    basis->evaluate(x, phi);
    return coeffs[j] * basis->template gradient<Scalar>(phi);
  }

  Mat jacobian(const Vec& x, double theta) const {
    Vec phi(nmon());
    basis->evaluate(x, phi);
    const Mat g = basis->template gradient<Scalar>(phi);
    const Eigen::VectorXd t = interpolation_weights(grid, theta);
    Mat out = Mat::Zero(nout, nvars());
    for (int j = 0; j < nodes(); ++j) out += Scalar(t(j)) * (coeffs[j] * g);
    return out;
  }

  /// The polynomial θ ↦ P(·, θ + ω) on the same grid.
  TorusPoly shifted(double omega) const {
    TorusPoly out = *this;
    const Eigen::MatrixXd s = shift_matrix(grid, -omega).entries;
    for (int k = 0; k < nodes(); ++k) {
      out.coeffs[k].setZero();
      for (int j = 0; j < nodes(); ++j)
        if (s(j, k) != 0.0) out.coeffs[k] += Scalar(s(j, k)) * coeffs[j];
    }
    return out;
  }

  /// Terms of total degree in [lo, hi].
  TorusPoly degree_range(int lo, int hi) const {
    TorusPoly out = *this;
    for (auto& c : out.coeffs)
      for (int m = 0; m < nmon(); ++m)
        if (basis->degree(m) < lo || basis->degree(m) > hi) c.col(m).setZero();
    return out;
  }

  double max_abs() const {
    double v = 0.0;
    for (const auto& c : coeffs) v = std::max(v, c.cwiseAbs().maxCoeff());
    return v;
  }

  TorusPoly& operator+=(const TorusPoly& o) {
    check_compatible(o);
    for (int j = 0; j < nodes(); ++j) coeffs[j] += o.coeffs[j];
    return *this;
  }
  TorusPoly& operator-=(const TorusPoly& o) {
    check_compatible(o);
    for (int j = 0; j < nodes(); ++j) coeffs[j] -= o.coeffs[j];
    return *this;
  }
  friend TorusPoly operator+(TorusPoly a, const TorusPoly& b) { return a += b; }
  friend TorusPoly operator-(TorusPoly a, const TorusPoly& b) { return a -= b; }

  void check_compatible(const TorusPoly& o) const {
    if (o.nout != nout || o.basis->nvars() != nvars() || o.max_degree() != max_degree() ||
        !(o.grid == grid))
      throw ValidationError("polynomial shapes differ");
  }
};

using RealPoly = TorusPoly<double>;
using ComplexPoly = TorusPoly<std::complex<double>>;

/// Identity map on nvars variables, degree ≤ maxdeg.
template <class Scalar>
TorusPoly<Scalar> identity_poly(int nvars, int maxdeg, const CollocationGrid& g) {
  TorusPoly<Scalar> p(nvars, nvars, maxdeg, g);
  for (auto& c : p.coeffs)
    for (int v = 0; v < nvars; ++v) c(v, 1 + v) = Scalar(1);
  return p;
}

/// Linear map z ↦ L(θ) z with node matrices L_j (nout × nvars).
template <class Scalar, class MatT>
TorusPoly<Scalar> linear_poly(const std::vector<MatT>& L, int maxdeg, const CollocationGrid& g) {
  const int nout = static_cast<int>(L.front().rows());
  const int nvars = static_cast<int>(L.front().cols());
  TorusPoly<Scalar> p(nout, nvars, maxdeg, g);
  for (int j = 0; j < g.size(); ++j)
    p.coeffs[j].middleCols(1, nvars) = L[j].template cast<Scalar>();
  return p;
}

/// Node-wise product of the coefficient vectors of two scalar polynomials in
/// the same variables, truncated at the maximal degree of the set.
template <class Scalar>
void truncated_product(const MonomialSet& set,
                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a,
                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out) {
  out.setZero(set.size());
  const int maxd = set.max_degree();
  for (int i = 0; i < set.size(); ++i) {
    if (a(i) == Scalar(0)) continue;
    const int di = set.degree(i);
    const int jend = set.degree_end(maxd - di);
    for (int j = 0; j < jend; ++j) {
      if (b(j) == Scalar(0)) continue;
      out(set.product(i, j)) += a(i) * b(j);
    }
  }
}

/// outer(inner(z, θ), θ) node-wise, truncated at the degree of the inner
/// polynomial's basis. inner.nout must equal outer.nvars.
template <class Scalar, class OuterScalar>
TorusPoly<Scalar> compose(const TorusPoly<OuterScalar>& outer, const TorusPoly<Scalar>& inner) {
  if (inner.nout != outer.nvars())
    throw ValidationError("compose: inner output count differs from outer variable count");
  if (!(inner.grid == outer.grid)) throw ValidationError("compose: grids differ");
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const MonomialSet& res = *inner.basis;
  const MonomialSet& out_set = *outer.basis;
  TorusPoly<Scalar> result(outer.nout, inner.nvars(), inner.max_degree(), inner.grid);
  std::vector<Vec> power(out_set.size());
  for (int j = 0; j < inner.nodes(); ++j) {
    power[0] = Vec::Zero(res.size());
    power[0](0) = Scalar(1);
    for (int m = 1; m < out_set.size(); ++m) {
      const Vec& p = power[out_set.predecessor(m)];
      const Vec q = inner.coeffs[j].row(out_set.last_var(m)).transpose();
      truncated_product(res, p, q, power[m]);
    }
    auto& c = result.coeffs[j];
    for (int m = 0; m < out_set.size(); ++m) {
      for (int r = 0; r < outer.nout; ++r) {
        const OuterScalar a = outer.coeffs[j](r, m);
        if (a == OuterScalar(0)) continue;
        c.row(r) += Scalar(a) * power[m].transpose();
      }
    }
  }
  return result;
}

/// Node-wise left multiplication by matrices L_j (rows × outer.nout).
template <class Scalar, class MatT>
TorusPoly<Scalar> left_multiply(const std::vector<MatT>& L, const TorusPoly<Scalar>& p) {
  TorusPoly<Scalar> out = p;
  out.nout = static_cast<int>(L.front().rows());
  for (int j = 0; j < p.nodes(); ++j)
    out.coeffs[j] = L[j].template cast<Scalar>() * p.coeffs[j];
  return out;
}

/// Same polynomial in a basis of different maximal degree (terms above the
/// new degree are dropped).
template <class Scalar>
TorusPoly<Scalar> rebase(const TorusPoly<Scalar>& p, int maxdeg) {
  TorusPoly<Scalar> out(p.nout, p.nvars(), maxdeg, p.grid);
  const int common = std::min(out.nmon(), p.nmon());
  for (int j = 0; j < p.nodes(); ++j) out.coeffs[j].leftCols(common) = p.coeffs[j].leftCols(common);
  return out;
}

}  // namespace foliate
