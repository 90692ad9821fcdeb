#include "foliate/normalform.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "foliate/bundles.hpp"
#include "foliate/error.hpp"

namespace foliate {

namespace {

std::vector<Eigen::MatrixXcd> shifted_nodes(const CollocationGrid& grid,
                                            const std::vector<Eigen::MatrixXcd>& v, double omega) {
  const Eigen::MatrixXd S = shift_matrix(grid, -omega).entries;
  std::vector<Eigen::MatrixXcd> out(v.size(), Eigen::MatrixXcd::Zero(v[0].rows(), v[0].cols()));
  for (std::size_t l = 0; l < v.size(); ++l)
    for (std::size_t r = 0; r < v.size(); ++r) out[l] += S(r, l) * v[r];
  return out;
}

}  // namespace

Diagonalization diagonalize_linear(const RealPoly& R, double omega) {
  const int dz = R.nout;
  if (R.nvars() != dz) throw ValidationError("diagonalize_linear: R must map Z to itself");
  const CollocationGrid& grid = R.grid;
  const int M = grid.size();
  std::vector<Eigen::MatrixXd> A(M);
  for (int j = 0; j < M; ++j) A[j] = R.coeffs[j].middleCols(1, dz);
  const BundleDecomposition dec = decompose_bundles(grid, A, omega);

  Diagonalization d;
  d.grid = grid;
  d.omega = omega;
  d.lambda.resize(dz);
  d.partner.resize(dz);
  d.Ud.assign(M, Eigen::MatrixXcd(dz, dz));
  int row = 0;
  for (const auto& c : dec.clusters) {
    const Eigen::MatrixXcd u0 = dec.spectrum.vector(c.representative);
    Eigen::Index r = 0, col = 0;
    u0.cwiseAbs().maxCoeff(&r, &col);
    // unit phase on the largest entry and unit size per node
    const Eigen::MatrixXcd u = u0 * std::polar(std::sqrt(double(M)) / u0.norm(), -std::arg(u0(r, col)));
    const bool complex_pair = static_cast<int>(c.members.size()) == 2 * M;
    if (!complex_pair && static_cast<int>(c.members.size()) != M)
      throw NumericalError("diagonalize_linear: unsupported eigenvalue multiplicity");
    if (row + (complex_pair ? 2 : 1) > dz)
      throw NumericalError("diagonalize_linear: spectrum does not match the dimension");
    for (int j = 0; j < M; ++j) d.Ud[j].row(row) = u.col(j).transpose();
    d.lambda(row) = c.lambda;
    d.partner[row] = row;
    if (complex_pair) {
      for (int j = 0; j < M; ++j) d.Ud[j].row(row + 1) = u.col(j).conjugate().transpose();
      d.lambda(row + 1) = std::conj(c.lambda);
      d.partner[row] = row + 1;
      d.partner[row + 1] = row;
      row += 2;
    } else {
      if (u.imag().norm() > 1e-6 * u.norm())
        throw NumericalError("diagonalize_linear: real eigenvalue with a complex bundle");
      for (int j = 0; j < M; ++j) d.Ud[j].row(row) = u.col(j).real().transpose().cast<std::complex<double>>();
      d.lambda(row) = c.lambda.real();
      row += 1;
    }
  }
  if (row != dz) throw NumericalError("diagonalize_linear: spectrum does not match the dimension");

  std::vector<Eigen::MatrixXcd> inv(M);
  for (int j = 0; j < M; ++j) {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(d.Ud[j]);
    if (!lu.isInvertible()) throw NumericalError("diagonalize_linear: singular change of frame");
    inv[j] = lu.inverse();
  }
  const ComplexPoly inner = linear_poly<std::complex<double>>(inv, R.max_degree(), grid);
  d.Rd = left_multiply(shifted_nodes(grid, d.Ud, omega), compose(R, inner));
  return d;
}

NormalFormModel solve_homological(const Diagonalization& d, double resonance_tol) {
  using cd = std::complex<double>;
  const int dz = static_cast<int>(d.lambda.size());
  const CollocationGrid& grid = d.grid;
  const int M = grid.size(), ell = grid.ell();
  const int sigma = d.Rd.max_degree();
  const MonomialSet& basis = *d.Rd.basis;

  NormalFormModel nf;
  nf.diag = d;
  nf.sigma = sigma;
  nf.resonance_tol = resonance_tol;
  nf.T = identity_poly<cd>(dz, sigma, grid);
  nf.Rbreve = ComplexPoly(dz, dz, sigma, grid);
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < dz; ++i) nf.Rbreve.coeffs[j](i, 1 + i) = d.lambda(i);

  // linear part of Rᵈ must already be diagonal
  for (int j = 0; j < M; ++j) {
    const Eigen::MatrixXcd L = d.Rd.coeffs[j].middleCols(1, dz);
    const double off = (L - Eigen::MatrixXcd(d.lambda.asDiagonal())).cwiseAbs().maxCoeff();
    if (off > 1e-8 * std::max(1.0, d.lambda.cwiseAbs().maxCoeff()))
      throw NumericalError("normal form: linear part is not diagonal after the change of frame");
  }

  // DFT matrices over the nodes, harmonics k = −ℓ..ℓ
  Eigen::MatrixXcd fwd(M, M), inv(M, M);
  for (int k = -ell; k <= ell; ++k)
    for (int j = 0; j < M; ++j) {
      fwd(k + ell, j) = std::polar(1.0 / M, -k * grid.node(j));
      inv(j, k + ell) = std::polar(1.0, k * grid.node(j));
    }

  for (int deg = 2; deg <= sigma; ++deg) {
    const ComplexPoly lhs = compose(d.Rd, nf.T);
    const ComplexPoly rhs = compose(nf.T.shifted(d.omega), nf.Rbreve);
    const ComplexPoly gamma = lhs - rhs;
    double scale = 0.0;
    for (int j = 0; j < M; ++j)
      scale = std::max(scale, gamma.coeffs[j]
                                  .middleCols(basis.degree_begin(deg),
                                              basis.degree_end(deg) - basis.degree_begin(deg))
                                  .cwiseAbs()
                                  .maxCoeff());
    for (int i0 = 0; i0 < dz; ++i0) {
      for (int m = basis.degree_begin(deg); m < basis.degree_end(deg); ++m) {
        Eigen::VectorXcd g(M);
        for (int j = 0; j < M; ++j) g(j) = gamma.coeffs[j](i0, m);
        const Eigen::VectorXcd c = fwd * g;
        cd lam_m = 1.0;
        const auto e = basis.exponents(m);
        for (int v = 0; v < dz; ++v) lam_m *= std::pow(d.lambda(v), e[v]);
        Eigen::VectorXcd tau = Eigen::VectorXcd::Zero(M);
        for (int k = -ell; k <= ell; ++k) {
          const cd div = lam_m * std::polar(1.0, k * d.omega) - d.lambda(i0);
          const cd ck = c(k + ell);
          if (std::abs(div) > resonance_tol * std::abs(d.lambda(i0))) {
            tau(k + ell) = ck / div;
          } else if (k == 0) {
            for (int j = 0; j < M; ++j) nf.Rbreve.coeffs[j](i0, m) = ck;
            nf.resonant.push_back({i0, m, 0, div, ck});
          } else if (std::abs(ck) > 1e-12 * std::max(1.0, scale)) {
            std::ostringstream msg;
            msg << "parametric resonance, autonomous normal form impossible (harmonic " << k
                << ", degree " << deg << ", divisor " << std::abs(div) << ")";
            throw NumericalError(msg.str());
          }
        }
        const Eigen::VectorXcd vals = inv * tau;
        for (int j = 0; j < M; ++j) nf.T.coeffs[j](i0, m) = vals(j);
      }
    }
  }
  return nf;
}

double conjugacy_residual(const NormalFormModel& nf) {
  const ComplexPoly a = compose(nf.T.shifted(nf.diag.omega), nf.Rbreve);
  const ComplexPoly b = compose(nf.diag.Rd, nf.T);
  return (a - b).max_abs();
}

ComplexPoly compose_decoder(const RealPoly& W, const std::vector<Eigen::MatrixXcd>& Ud,
                            const ComplexPoly& T) {
  std::vector<Eigen::MatrixXcd> inv(Ud.size());
  for (std::size_t j = 0; j < Ud.size(); ++j) inv[j] = Ud[j].inverse();
  return compose(W, left_multiply(inv, T));
}

double reality_defect(const ComplexPoly& p, const std::vector<int>& partner,
                      const std::vector<int>* out_partner) {
  const MonomialSet& basis = *p.basis;
  const int nv = basis.nvars();
  if (static_cast<int>(partner.size()) != nv) throw ValidationError("reality_defect: partner size");
  if (out_partner && static_cast<int>(out_partner->size()) != p.nout)
    throw ValidationError("reality_defect: output partner size");
  std::vector<int> swapped(nv);
  double defect = 0.0;
  for (int m = 0; m < basis.size(); ++m) {
    const auto e = basis.exponents(m);
    for (int v = 0; v < nv; ++v) swapped[partner[v]] = e[v];
    const int ms = basis.index(swapped);
    for (const auto& c : p.coeffs)
      for (int i = 0; i < c.rows(); ++i) {
        const int j = out_partner ? (*out_partner)[i] : i;
        defect = std::max(defect, std::abs(c(i, m) - std::conj(c(j, ms))));
      }
  }
  return defect;
}

void write_normal_form(std::ostream& os, const NormalFormModel& nf) {
  const MonomialSet& basis = *nf.Rbreve.basis;
  os << std::setprecision(17);
  os << "normal_form dim=" << nf.dim() << " sigma=" << nf.sigma
     << " resonance_tol=" << nf.resonance_tol << " omega=" << nf.diag.omega << '\n';
  os << "# lambda: re im\n";
  for (int i = 0; i < nf.dim(); ++i)
    os << "lambda " << nf.diag.lambda(i).real() << ' ' << nf.diag.lambda(i).imag() << '\n';
  os << "# resonant terms: output, exponents, harmonic, |divisor|, coefficient re im\n";
  for (const auto& t : nf.resonant) {
    os << "resonant " << t.output + 1 << " [";
    const auto e = basis.exponents(t.monomial);
    for (int v = 0; v < basis.nvars(); ++v) os << (v ? "," : "") << e[v];
    os << "] " << t.harmonic << ' ' << std::abs(t.divisor) << ' ' << t.value.real() << ' '
       << t.value.imag() << '\n';
  }
}

}  // namespace foliate
