#include "foliate/bundles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "foliate/error.hpp"

namespace foliate {

Eigen::MatrixXcd BundleSpectrum::vector(int c) const {
  return Eigen::Map<const Eigen::MatrixXcd>(vectors.col(c).data(), dim, grid.size());
}

BundleSpectrum bundle_eigenproblem(const CollocationGrid& grid,
                                   const std::vector<Eigen::MatrixXd>& A, double omega) {
  const int M = grid.size();
  if (static_cast<int>(A.size()) != M) throw ValidationError("bundle eigenproblem: node count mismatch");
  const int n = static_cast<int>(A.front().rows());
  const Eigen::MatrixXd S = shift_matrix(grid, -omega).entries;
  // (Mu)_{l,k} = Σ_{i,j} S_{jk} A_{il}(ϑ_k) u_{ij}; block (k, j) is S_{jk} A_kᵀ
  Eigen::MatrixXd op(n * M, n * M);
  for (int k = 0; k < M; ++k)
    for (int j = 0; j < M; ++j) op.block(k * n, j * n, n, n) = S(j, k) * A[k].transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(op, true);
  if (es.info() != Eigen::Success) throw NumericalError("bundle eigenproblem: eigensolver failed");
  BundleSpectrum s;
  s.grid = grid;
  s.dim = n;
  s.values = es.eigenvalues();
  s.vectors = es.eigenvectors();
  return s;
}

std::vector<SpectrumCluster> cluster_spectrum(const Eigen::VectorXcd& values, int n_state,
                                              int ell) {
  const int N = static_cast<int>(values.size());
  const int M = 2 * ell + 1;
  if (N == 0) throw ValidationError("cluster_spectrum: empty spectrum");
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> logmag(N);
  for (int i = 0; i < N; ++i) logmag[i] = std::log(std::max(std::abs(values(i)), 1e-300));
  // decreasing magnitude, stable on index
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logmag[a] > logmag[b]; });
  std::vector<double> sorted(N);
  for (int i = 0; i < N; ++i) sorted[i] = logmag[order[i]];

  const int min_clusters = (n_state + 1) / 2;
  for (int ncl = n_state; ncl >= std::max(min_clusters, 1); --ncl) {
    std::vector<double> centre(ncl);
    for (int c = 0; c < ncl; ++c)
      centre[c] = sorted[std::min(N - 1, static_cast<int>((c + 0.5) * N / ncl))];
    std::vector<int> label(N, -1);
    for (int iter = 0; iter < 200; ++iter) {
      bool changed = false;
      for (int i = 0; i < N; ++i) {
        int best = 0;
        for (int c = 1; c < ncl; ++c)
          if (std::abs(sorted[i] - centre[c]) < std::abs(sorted[i] - centre[best])) best = c;
        if (best != label[i]) {
          label[i] = best;
          changed = true;
        }
      }
      if (!changed) break;
      for (int c = 0; c < ncl; ++c) {
        double sum = 0.0;
        int cnt = 0;
        for (int i = 0; i < N; ++i)
          if (label[i] == c) {
            sum += sorted[i];
            ++cnt;
          }
        if (cnt > 0) centre[c] = sum / cnt;
      }
    }
    std::vector<std::vector<int>> groups(ncl);
    for (int i = 0; i < N; ++i) groups[label[i]].push_back(i);
    bool ok = true;
    for (const auto& g : groups)
      if (g.empty() || g.size() % M != 0) ok = false;
    if (!ok) continue;
    std::vector<SpectrumCluster> out;
    for (const auto& g : groups) {
      SpectrumCluster c;
      for (int i : g) c.members.push_back(order[i]);
      c.hi = std::exp(sorted[g.front()]);
      c.lo = std::exp(sorted[g.front()]);
      for (int i : g) {
        c.hi = std::max(c.hi, std::exp(sorted[i]));
        c.lo = std::min(c.lo, std::exp(sorted[i]));
      }
      std::sort(c.members.begin(), c.members.end());
      out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SpectrumCluster& a, const SpectrumCluster& b) { return a.hi > b.hi; });
    return out;
  }
  throw NumericalError("spectral circles unresolved");
}

int dominant_harmonic(const CollocationGrid& grid, const Eigen::MatrixXcd& u) {
  const Eigen::MatrixXcd c = fourier_coefficients(grid, u);
  const int ell = grid.ell();
  std::vector<double> energy(ell + 1, 0.0);
  for (int l = -ell; l <= ell; ++l) energy[std::abs(l)] += c.col(l + ell).squaredNorm();
  int best = 0;
  for (int l = 1; l <= ell; ++l)
    if (energy[l] > energy[best]) best = l;
  return best;
}

int select_representative(const BundleSpectrum& spec, const SpectrumCluster& cluster) {
  if (cluster.members.empty()) throw ValidationError("select_representative: empty cluster");
  int best = -1, best_h = 0;
  for (int idx : cluster.members) {
    const int h = dominant_harmonic(spec.grid, spec.vector(idx));
    if (best < 0) {
      best = idx;
      best_h = h;
      continue;
    }
    if (h != best_h) {
      if (h < best_h) {
        best = idx;
        best_h = h;
      }
      continue;
    }
    const double ma = std::abs(spec.values(idx)), mb = std::abs(spec.values(best));
    if (std::abs(ma - mb) > 1e-9 * std::max(ma, mb)) {
      if (ma > mb) best = idx;
      continue;
    }
    const bool ua = spec.values(idx).imag() >= 0.0, ub = spec.values(best).imag() >= 0.0;
    if (ua != ub) {
      if (ua) best = idx;
      continue;
    }
    if (idx < best) best = idx;
  }
  return best;
}

RealBundle realify(const CollocationGrid& grid, std::complex<double> lambda,
                   const Eigen::MatrixXcd& u, int cluster_size) {
  const int M = grid.size();
  const int n = static_cast<int>(u.rows());
  Eigen::Index r = 0, c = 0;
  u.cwiseAbs().maxCoeff(&r, &c);
  const std::complex<double> phase = std::polar(1.0, -std::arg(u(r, c)));
  const Eigen::MatrixXcd v = u * phase / u.norm();
  RealBundle b;
  b.lambda = lambda;
  if (cluster_size == M) {
    const double residual = v.imag().norm();
    if (residual > 1e-6 || std::abs(lambda.imag()) > 1e-6 * std::max(1.0, std::abs(lambda))) {
      std::ostringstream msg;
      msg << "realify: eigenvector of a real bundle is not realizable (imaginary residual "
          << residual << ")";
      throw NumericalError(msg.str());
    }
    b.U.assign(M, Eigen::MatrixXd(1, n));
    for (int j = 0; j < M; ++j) b.U[j] = v.col(j).real().transpose();
    b.Lambda = Eigen::MatrixXd::Constant(1, 1, lambda.real());
  } else if (cluster_size == 2 * M) {
    b.U.assign(M, Eigen::MatrixXd(2, n));
    for (int j = 0; j < M; ++j) {
      b.U[j].row(0) = v.col(j).real().transpose();
      b.U[j].row(1) = v.col(j).imag().transpose();
    }
    b.Lambda.resize(2, 2);
    b.Lambda << lambda.real(), -lambda.imag(), lambda.imag(), lambda.real();
  } else {
    std::ostringstream msg;
    msg << "realify: unsupported cluster multiplicity " << cluster_size << " (grid size " << M
        << ")";
    throw NumericalError(msg.str());
  }
  return b;
}

OrthonormalFrame orthonormalize(const CollocationGrid& grid,
                                const std::vector<Eigen::MatrixXd>& Ud,
                                const Eigen::MatrixXd& Rd, double omega) {
  const int M = grid.size();
  OrthonormalFrame f;
  f.U.resize(M);
  f.T.resize(M);
  f.R.resize(M);
  std::vector<Eigen::MatrixXd> Tinv(M);
  for (int l = 0; l < M; ++l) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ud[l], Eigen::ComputeFullU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    if (s.size() == 0 || s.minCoeff() <= 1e-12 * s.maxCoeff() || s.maxCoeff() == 0.0)
      throw NumericalError("orthonormalize: bundle rows are linearly dependent at a grid node");
    const Eigen::MatrixXd& G = svd.matrixU();
    f.U[l] = G * svd.matrixV().transpose();
    f.T[l] = G * s.asDiagonal() * G.transpose();
    Tinv[l] = G * s.cwiseInverse().asDiagonal() * G.transpose();
  }
  const Eigen::MatrixXd S = shift_matrix(grid, -omega).entries;
  for (int l = 0; l < M; ++l) {
    Eigen::MatrixXd tinv_shift = Eigen::MatrixXd::Zero(Rd.rows(), Rd.rows());
    for (int r = 0; r < M; ++r) tinv_shift += S(r, l) * Tinv[r];
    f.R[l] = tinv_shift * Rd * f.T[l];
  }
  return f;
}

namespace {

// When λ collides with another member (an internal resonance such as
// 2 arg λ ≡ kω) the eigensolver returns an arbitrary mix of the two harmonic
// families. Replace it by the combination with the least Σ l²|c_l|².
Eigen::MatrixXcd smoothest_in_eigenspace(const BundleSpectrum& spec, const SpectrumCluster& c,
                                         int rep) {
  const std::complex<double> lam = spec.values(rep);
  std::vector<int> basis{rep};
  for (int m : c.members)
    if (m != rep && std::abs(spec.values(m) - lam) <= 1e-10 * std::abs(lam)) basis.push_back(m);
  if (basis.size() == 1) return spec.vector(rep);

  const CollocationGrid& grid = spec.grid;
  const int ell = grid.ell();
  const int nb = static_cast<int>(basis.size());
  const int n = spec.dim;
  Eigen::MatrixXcd F(n * (2 * ell + 1), nb), WF(F.rows(), nb);
  for (int b = 0; b < nb; ++b) {
    const Eigen::MatrixXcd co = fourier_coefficients(grid, spec.vector(basis[b]));
    for (int l = -ell; l <= ell; ++l) {
      F.col(b).segment((l + ell) * n, n) = co.col(l + ell);
      WF.col(b).segment((l + ell) * n, n) = static_cast<double>(l) * co.col(l + ell);
    }
  }
  const Eigen::MatrixXcd G = F.adjoint() * F, H = WF.adjoint() * WF;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, G);
  if (es.info() != Eigen::Success) return spec.vector(rep);
  const Eigen::VectorXcd a = es.eigenvectors().col(0);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, grid.size());
  for (int b = 0; b < nb; ++b) u += a(b) * spec.vector(basis[b]);
  return u;
}

}  // namespace

BundleDecomposition decompose_bundles(const CollocationGrid& grid,
                                      const std::vector<Eigen::MatrixXd>& A, double omega) {
  BundleDecomposition d;
  d.spectrum = bundle_eigenproblem(grid, A, omega);
  d.clusters = cluster_spectrum(d.spectrum.values, d.spectrum.dim, grid.ell());
  for (auto& c : d.clusters) {
    c.representative = select_representative(d.spectrum, c);
    c.lambda = d.spectrum.values(c.representative);
    d.bundles.push_back(realify(grid, c.lambda, smoothest_in_eigenspace(d.spectrum, c, c.representative),
                                static_cast<int>(c.members.size())));
  }
  return d;
}

namespace {

void stack(const BundleDecomposition& dec, const std::vector<int>& which, int M,
           std::vector<Eigen::MatrixXd>& U, Eigen::MatrixXd& R) {
  int rows = 0;
  for (int c : which) rows += dec.bundles[c].rows();
  const int n = dec.spectrum.dim;
  U.assign(M, Eigen::MatrixXd(rows, n));
  R = Eigen::MatrixXd::Zero(rows, rows);
  int off = 0;
  for (int c : which) {
    const auto& b = dec.bundles[c];
    for (int l = 0; l < M; ++l) U[l].middleRows(off, b.rows()) = b.U[l];
    R.block(off, off, b.rows(), b.rows()) = b.Lambda;
    off += b.rows();
  }
}

}  // namespace

BundleFrame make_frame(const BundleDecomposition& dec, const std::vector<int>& selected,
                       double omega) {
  const int ncl = static_cast<int>(dec.clusters.size());
  if (selected.empty()) throw ValidationError("mode selection is empty");
  std::vector<bool> used(ncl, false);
  for (int c : selected) {
    if (c < 0 || c >= ncl) {
      std::ostringstream msg;
      msg << "mode " << c + 1 << " does not exist; " << ncl << " spectral clusters were found";
      throw ValidationError(msg.str());
    }
    if (used[c]) throw ValidationError("mode selection lists a cluster twice");
    used[c] = true;
  }
  std::vector<int> rest;
  for (int c = 0; c < ncl; ++c)
    if (!used[c]) rest.push_back(c);
  if (rest.empty()) throw ValidationError("mode selection leaves no complementary bundle");

  const CollocationGrid& grid = dec.spectrum.grid;
  const int M = grid.size();
  std::vector<Eigen::MatrixXd> Ud, Vd;
  Eigen::MatrixXd Rd, Sd;
  stack(dec, selected, M, Ud, Rd);
  stack(dec, rest, M, Vd, Sd);
  if (Ud.front().rows() + Vd.front().rows() != dec.spectrum.dim)
    throw NumericalError("bundle rows do not add up to the state dimension");
  const OrthonormalFrame u = orthonormalize(grid, Ud, Rd, omega);
  const OrthonormalFrame v = orthonormalize(grid, Vd, Sd, omega);
  BundleFrame f;
  f.grid = grid;
  f.omega = omega;
  f.selected = selected;
  f.Ubox = u.U;
  f.Rbox = u.R;
  f.Vbox = v.U;
  f.Sbox = v.R;
  for (int l = 0; l < M; ++l) {
    Eigen::MatrixXd full(f.dim(), f.dim());
    full << f.Ubox[l], f.Vbox[l];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(full);
    if (svd.singularValues().minCoeff() < 1e-8)
      throw NumericalError("selected and complementary bundles are not transversal");
  }
  return f;
}

namespace {

Eigen::MatrixXd interpolate_nodes(const CollocationGrid& grid,
                                  const std::vector<Eigen::MatrixXd>& v, double theta) {
  const Eigen::VectorXd t = interpolation_weights(grid, theta);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.front().rows(), v.front().cols());
  for (int j = 0; j < grid.size(); ++j) out += t(j) * v[j];
  return out;
}

}  // namespace

Eigen::MatrixXd BundleFrame::U_at(double theta) const { return interpolate_nodes(grid, Ubox, theta); }
Eigen::MatrixXd BundleFrame::V_at(double theta) const { return interpolate_nodes(grid, Vbox, theta); }

double invariance_residual(const CollocationGrid& grid, const std::vector<Eigen::MatrixXd>& U,
                           const std::vector<Eigen::MatrixXd>& R,
                           const std::vector<Eigen::MatrixXd>& A, double omega) {
  const int M = grid.size();
  const Eigen::MatrixXd S = shift_matrix(grid, -omega).entries;
  double res = 0.0;
  for (int l = 0; l < M; ++l) {
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(U[l].rows(), U[l].cols());
    for (int r = 0; r < M; ++r) shifted += S(r, l) * U[r];
    res = std::max(res, (R[l] * U[l] - shifted * A[l]).cwiseAbs().maxCoeff());
  }
  return res;
}

std::complex<double> field_eigenvalue(std::complex<double> lambda, double dt) {
  return std::log(lambda) / dt;
}

namespace {

void write_block(std::ostream& os, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

Eigen::MatrixXd read_block(std::istream& is, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw ValidationError("bundle frame: truncated data");
  return m;
}

}  // namespace

void write_frame(std::ostream& os, const BundleFrame& f) {
  os << std::setprecision(17);
  os << "ell=" << f.grid.ell() << " n=" << f.dim() << " dimz=" << f.dim_z()
     << " dimzc=" << f.dim_zc() << " omega=" << f.omega << '\n';
  os << "modes";
  for (int c : f.selected) os << ' ' << c + 1;
  os << '\n';
  for (int l = 0; l < f.grid.size(); ++l) {
    write_block(os, f.Ubox[l]);
    write_block(os, f.Vbox[l]);
    write_block(os, f.Rbox[l]);
    write_block(os, f.Sbox[l]);
  }
}

BundleFrame read_frame(std::istream& is) {
  std::string header, modes;
  if (!std::getline(is, header) || !std::getline(is, modes))
    throw ValidationError("bundle frame: missing header");
  int ell, n, dz, dzc;
  double omega;
  if (std::sscanf(header.c_str(), "ell=%d n=%d dimz=%d dimzc=%d omega=%lf", &ell, &n, &dz, &dzc,
                  &omega) != 5 ||
      ell < 0 || dz < 1 || dzc < 1 || dz + dzc != n)
    throw ValidationError("bundle frame: bad header '" + header + "'");
  BundleFrame f;
  f.grid = CollocationGrid(ell);
  f.omega = omega;
  std::istringstream ms(modes);
  std::string word;
  ms >> word;
  if (word != "modes") throw ValidationError("bundle frame: missing mode list");
  for (int c; ms >> c;) f.selected.push_back(c - 1);
  for (int l = 0; l < f.grid.size(); ++l) {
    f.Ubox.push_back(read_block(is, dz, n));
    f.Vbox.push_back(read_block(is, dzc, n));
    f.Rbox.push_back(read_block(is, dz, dz));
    f.Sbox.push_back(read_block(is, dzc, dzc));
  }
  return f;
}

}  // namespace foliate
