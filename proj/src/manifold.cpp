#include "foliate/manifold.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "foliate/error.hpp"

namespace foliate {

DecoderPoly recover_manifold(const FoliationModel& m, int max_iter) {
  const int dz = m.dim_z, n = m.dim(), M = m.grid.size(), sigma = m.sigma;
  // stacked encoder E = [U; V] split into constant, linear and nonlinear parts
  RealPoly E(n, n, sigma, m.grid);
  for (int j = 0; j < M; ++j) E.coeffs[j] << m.U.coeffs[j], m.V.coeffs[j];
  const RealPoly Enl = E.degree_range(2, sigma);
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> Binv(M);
  bool constants = false;
  for (int j = 0; j < M; ++j) {
    const Eigen::MatrixXd B = E.coeffs[j].middleCols(1, n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    const auto s = svd.singularValues();
    if (s(s.size() - 1) < 1e-12 * std::max(1.0, s(0))) throw NumericalError("encoder frames tangent");
    Binv[j].compute(B);
    if (E.coeffs[j].col(0).cwiseAbs().maxCoeff() > 0.0) constants = true;
  }

  // right-hand side base: (z − Uᶜ, −Vᶜ)
  RealPoly base(n, dz, sigma, m.grid);
  for (int j = 0; j < M; ++j) {
    base.coeffs[j].col(0) = -E.coeffs[j].col(0);
    for (int i = 0; i < dz; ++i) base.coeffs[j](i, 1 + i) += 1.0;
  }

  DecoderPoly d;
  d.dim_z = dz;
  d.dim_zc = m.dim_zc;
  d.W = RealPoly(n, dz, sigma, m.grid);
  const int iterations = constants ? max_iter : sigma;
  for (int it = 0; it < iterations; ++it) {
    const RealPoly rhs = base - compose(Enl, d.W);
    double change = 0.0, scale = 0.0;
    for (int j = 0; j < M; ++j) {
      const Eigen::MatrixXd next = Binv[j].solve(rhs.coeffs[j]);
      change = std::max(change, (next - d.W.coeffs[j]).cwiseAbs().maxCoeff());
      scale = std::max(scale, next.cwiseAbs().maxCoeff());
      d.W.coeffs[j] = next;
    }
    if (constants && it + 1 >= sigma && change <= 1e-15 * std::max(1.0, scale)) break;
    if (constants && it + 1 == iterations)
      throw NumericalError("manifold recovery: fixed-point iteration did not converge");
  }
  return d;
}

double manifold_residual(const FoliationModel& m, const DecoderPoly& d, const Eigen::VectorXd& z,
                         double theta) {
  const Eigen::VectorXd w = d.W.eval(z, theta);
  const Eigen::VectorXd t = interpolation_weights(m.grid, theta);
  Eigen::VectorXd r(m.dim());
  r << eval_U(m, w, t) - z, eval_V(m, w, t);
  return r.norm();
}

void write_decoder(std::ostream& os, const DecoderPoly& d) {
  os << "decoder dimz=" << d.dim_z << " dimzc=" << d.dim_zc << '\n';
  write_poly(os, "W", d.W);
}

DecoderPoly read_decoder(std::istream& is, const CollocationGrid& grid) {
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("decoder: empty input");
  DecoderPoly d;
  if (std::sscanf(header.c_str(), "decoder dimz=%d dimzc=%d", &d.dim_z, &d.dim_zc) != 2 ||
      d.dim_z < 1 || d.dim_zc < 1)
    throw ValidationError("decoder: bad header '" + header + "'");
  d.W = read_poly(is, "W", grid);
  if (d.W.nout != d.dim_z + d.dim_zc || d.W.nvars() != d.dim_z)
    throw ValidationError("decoder: polynomial shape disagrees with the header");
  return d;
}

}  // namespace foliate
