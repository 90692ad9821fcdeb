#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "foliate/bundles.hpp"
#include "foliate/error.hpp"

using namespace foliate;
using cd = std::complex<double>;

namespace {

// Block-diagonal rotation-scalings conjugated by a fixed well-conditioned P.
Eigen::MatrixXd modal_matrix(const std::vector<std::pair<double, double>>& pairs, double real_ev,
                             std::uint64_t seed) {
  const int n = 2 * static_cast<int>(pairs.size()) + (real_ev != 0.0 ? 1 : 0);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [r, a] = pairs[p];
    D.block(2 * p, 2 * p, 2, 2) << r * std::cos(a), -r * std::sin(a), r * std::sin(a), r * std::cos(a);
  }
  if (real_ev != 0.0) D(n - 1, n - 1) = real_ev;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < P.size(); ++i) P.data()[i] += 0.2 * nd(rng);
  return P * D * P.inverse();
}

}  // namespace

TEST_CASE("constant matrix spectrum and clusters") {
  const CollocationGrid g(2);
  const Eigen::MatrixXd A = modal_matrix({{0.95, 0.6}, {0.8, 1.4}}, 0.5, 1);
  const std::vector<Eigen::MatrixXd> As(g.size(), A);
  const auto dec = decompose_bundles(g, As, 0.7);
  REQUIRE(dec.clusters.size() == 3);
  CHECK(dec.clusters[0].members.size() == 2 * 5);
  CHECK(dec.clusters[1].members.size() == 2 * 5);
  CHECK(dec.clusters[2].members.size() == 5);
  CHECK(std::abs(dec.clusters[0].lambda - std::polar(0.95, 0.6)) < 1e-10);
  CHECK(std::abs(dec.clusters[1].lambda - std::polar(0.8, 1.4)) < 1e-10);
  CHECK(std::abs(dec.clusters[2].lambda - cd(0.5)) < 1e-10);
  for (std::size_t c = 0; c < dec.clusters.size(); ++c) {
    const auto& b = dec.bundles[c];
    CHECK(invariance_residual(g, b.U, std::vector<Eigen::MatrixXd>(g.size(), b.Lambda), As, 0.7) < 1e-9);
  }
}

TEST_CASE("bundle eigenproblem residual") {
  const CollocationGrid g(3);
  std::vector<Eigen::MatrixXd> As;
  const Eigen::MatrixXd A0 = modal_matrix({{0.9, 0.8}}, 0.4, 2);
  for (int j = 0; j < g.size(); ++j) {
    Eigen::MatrixXd Aj = A0;
    Aj(0, 2) += 0.1 * std::cos(g.node(j));
    As.push_back(Aj);
  }
  const double w = 0.9;
  const auto spec = bundle_eigenproblem(g, As, w);
  CHECK(spec.values.size() == 3 * g.size());
  const Eigen::MatrixXd S = shift_matrix(g, -w).entries;
  for (int c = 0; c < spec.values.size(); ++c) {
    const Eigen::MatrixXcd u = spec.vector(c);  // n × M
    const Eigen::MatrixXcd ushift = u * S;
    double worst = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      const Eigen::RowVectorXcd lhs = ushift.col(k).transpose() * As[k];
      worst = std::max(worst, (lhs - spec.values(c) * u.col(k).transpose()).norm());
    }
    CHECK(worst < 1e-9 * u.norm());
  }
}

TEST_CASE("harmonic copies and representative") {
  const CollocationGrid g(2);
  const Eigen::MatrixXd A = modal_matrix({{0.95, 0.6}}, 0.0, 3);
  const auto dec = decompose_bundles(g, std::vector<Eigen::MatrixXd>(g.size(), A), 0.7);
  const auto& c = dec.clusters.front();
  // every member is λ e^{ikω} for some harmonic k
  for (int m : c.members) CHECK(std::abs(std::abs(dec.spectrum.values(m)) - 0.95) < 1e-10);
  CHECK(dominant_harmonic(g, dec.spectrum.vector(c.representative)) == 0);
  CHECK(dec.spectrum.values(c.representative).imag() >= 0.0);
}

TEST_CASE("unresolved circles are reported") {
  Eigen::VectorXcd v(4);
  v << 0.9, 0.5, 0.3, 0.2;
  CHECK_THROWS_AS(cluster_spectrum(v, 2, 1), NumericalError);
}

TEST_CASE("realify a complex pair") {
  const CollocationGrid g(0);
  const Eigen::MatrixXd A = modal_matrix({{0.9, 0.5}}, 0.0, 4);
  const auto dec = decompose_bundles(g, {A}, 0.0);
  const auto& b = dec.bundles.front();
  CHECK(b.rows() == 2);
  CHECK(b.Lambda(0, 0) == doctest::Approx(0.9 * std::cos(0.5)));
  CHECK(std::abs(b.Lambda(1, 0)) == doctest::Approx(0.9 * std::sin(0.5)));
  CHECK((b.Lambda * b.U[0] - b.U[0] * A).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("orthonormal frame") {
  const CollocationGrid g(2);
  std::vector<Eigen::MatrixXd> As;
  const Eigen::MatrixXd A0 = modal_matrix({{0.95, 0.6}, {0.8, 1.4}}, 0.0, 5);
  for (int j = 0; j < g.size(); ++j) As.push_back(A0 * (1.0 + 0.05 * std::sin(g.node(j))));
  const double w = 0.7;
  const auto dec = decompose_bundles(g, As, w);
  const BundleFrame f = make_frame(dec, {0}, w);
  CHECK(f.dim_z() == 2);
  CHECK(f.dim_zc() == 2);
  for (int j = 0; j < g.size(); ++j) {
    CHECK((f.Ubox[j] * f.Ubox[j].transpose() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.Vbox[j] * f.Vbox[j].transpose() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // the polar factor is a pointwise product, so invariance through the
  // interpolated shift is only spectrally accurate in ℓ. arg λ₂ = 1.4 = 2ω, so
  // λ₂ and conj(λ₂)e^{4iω} coincide once ℓ ≥ 4.
  double prev = 1.0;
  for (int ell : {2, 4, 8}) {
    const CollocationGrid gl(ell);
    std::vector<Eigen::MatrixXd> Al;
    for (int j = 0; j < gl.size(); ++j) Al.push_back(A0 * (1.0 + 0.05 * std::sin(gl.node(j))));
    const BundleFrame fl = make_frame(decompose_bundles(gl, Al, w), {0}, w);
    const double r = std::max(invariance_residual(gl, fl.Ubox, fl.Rbox, Al, w),
                              invariance_residual(gl, fl.Vbox, fl.Sbox, Al, w));
    MESSAGE("ell=" << ell << " invariance " << r);
    CHECK(r < prev);
    prev = r;
  }
  CHECK(prev < 1e-9);

  CHECK_THROWS_AS(make_frame(dec, {5}, w), ValidationError);
  CHECK_THROWS_AS(make_frame(dec, {0, 1}, w), ValidationError);

  std::stringstream ss;
  write_frame(ss, f);
  const BundleFrame r = read_frame(ss);
  CHECK(r.selected == f.selected);
  CHECK((r.Ubox[3] - f.Ubox[3]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.omega == f.omega);
}

TEST_CASE("field eigenvalue") {
  const cd lf(-0.0163, 0.4971);
  const cd lm = std::exp(lf * 0.8);
  const cd back = field_eigenvalue(lm, 0.8);
  CHECK(back.real() == doctest::Approx(lf.real()).epsilon(1e-12));
  CHECK(back.imag() == doctest::Approx(lf.imag()).epsilon(1e-12));
}
