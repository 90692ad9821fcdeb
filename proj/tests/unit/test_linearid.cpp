#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "foliate/error.hpp"
#include "foliate/linearid.hpp"

using namespace foliate;

namespace {

// Samples of x ↦ A x + b(θ) with uniformly random states and phases.
TrajectoryDataset affine_data(const Eigen::MatrixXd& A, const std::function<Eigen::VectorXd(double)>& b,
                              double omega, int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1), ph(0, 2 * std::numbers::pi);
  TrajectoryDataset d;
  d.dim = static_cast<int>(A.rows());
  d.omega = omega;
  d.x.resize(d.dim, N);
  d.y.resize(d.dim, N);
  d.theta.resize(N);
  d.trajectory.assign(N, 0);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < d.dim; ++i) d.x(i, k) = u(rng);
    d.theta(k) = ph(rng);
    d.y.col(k) = A * d.x.col(k) + b(d.theta(k));
    d.trajectory[k] = k;
  }
  return d;
}

Eigen::MatrixXd stable_matrix(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
  return 0.8 * A / A.operatorNorm();
}

}  // namespace

TEST_CASE("scaling weights") {
  TrajectoryDataset d;
  d.dim = 2;
  d.x = Eigen::MatrixXd::Zero(2, 2);
  d.x(0, 1) = 1.0;
  d.y = d.x;
  d.theta = Eigen::VectorXd::Zero(2);
  d.trajectory = {0, 1};
  const TorusFunction K(CollocationGrid(0), Eigen::MatrixXd::Zero(2, 1));
  const double eps = 1.0 / 256.0;
  const Eigen::VectorXd w = scaling_weights(d, K, eps);
  CHECK(w(0) == doctest::Approx(1.0 / (eps * eps)));
  CHECK(w(1) == doctest::Approx(1.0 / (std::pow(2.0, -16) + 1.0)));
  CHECK_THROWS_AS(scaling_weights(d, K, 0.0), ValidationError);
}

TEST_CASE("fit recovers a constant linear map") {
  const Eigen::MatrixXd A = stable_matrix(3, 1);
  const auto d = affine_data(A, [](double) { return Eigen::VectorXd::Zero(3); }, 0.9, 400, 2);
  const CollocationGrid g(2);
  const AffineModel m = fit_affine(d, Eigen::VectorXd::Ones(d.size()), g);
  for (int j = 0; j < g.size(); ++j) CHECK((m.A[j] - A).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(m.b.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit recovers a phase dependent offset") {
  const Eigen::MatrixXd A = stable_matrix(2, 3);
  auto b = [](double th) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    v(0) = std::cos(th);
    return v;
  };
  const auto d = affine_data(A, b, 0.9, 400, 4);
  const CollocationGrid g(2);
  const AffineModel m = fit_affine(d, Eigen::VectorXd::Ones(d.size()), g);
  for (int j = 0; j < g.size(); ++j) CHECK((m.b.col(j) - b(g.node(j))).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero weights drop points") {
  const Eigen::MatrixXd A = stable_matrix(2, 5);
  auto d = affine_data(A, [](double) { return Eigen::VectorXd::Zero(2); }, 0.9, 300, 6);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int k = 0; k < d.size(); ++k) d.y.col(k) += 0.01 * Eigen::Vector2d(nd(rng), nd(rng));
  Eigen::VectorXd w = Eigen::VectorXd::Ones(d.size());
  std::vector<int> keep;
  for (int k = 0; k < d.size(); ++k) {
    if (k % 2) w(k) = 0.0;
    else keep.push_back(k);
  }
  const CollocationGrid g(1);
  const AffineModel a = fit_affine(d, w, g);
  const AffineModel b = fit_affine(subset(d, keep), Eigen::VectorXd::Ones(static_cast<int>(keep.size())), g);
  for (int j = 0; j < g.size(); ++j) CHECK((a.A[j] - b.A[j]).cwiseAbs().maxCoeff() < 1e-10);
  // multiplying all weights by a constant leaves the fit unchanged
  const AffineModel c = fit_affine(d, 37.0 * w, g);
  for (int j = 0; j < g.size(); ++j) CHECK((a.A[j] - c.A[j]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficiency is reported") {
  const Eigen::MatrixXd A = stable_matrix(2, 8);
  auto d = affine_data(A, [](double) { return Eigen::VectorXd::Zero(2); }, 0.9, 50, 9);
  d.x.row(1).setZero();
  CHECK_THROWS_AS(fit_affine(d, Eigen::VectorXd::Ones(d.size()), CollocationGrid(0)), NumericalError);
}

TEST_CASE("torus of a constant affine map") {
  const Eigen::MatrixXd A = stable_matrix(3, 10);
  AffineModel m;
  m.grid = CollocationGrid(2);
  m.A.assign(m.grid.size(), A);
  Eigen::Vector3d b(0.3, -0.1, 0.7);
  m.b = b.replicate(1, m.grid.size());
  const TorusFunction K = solve_torus(m, 0.6);
  const Eigen::Vector3d fixed = (Eigen::Matrix3d::Identity() - A).lu().solve(b);
  for (int j = 0; j < m.grid.size(); ++j) CHECK((K.values.col(j) - fixed).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(torus_residual(m, K, 0.6) < 1e-12);

  m.b.setZero();
  CHECK(solve_torus(m, 0.6).values.cwiseAbs().maxCoeff() == 0.0);

  m.A.assign(m.grid.size(), Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(solve_torus(m, 0.0), NumericalError);
}

TEST_CASE("iteration on noiseless linear data") {
  const Eigen::MatrixXd A = stable_matrix(3, 11);
  const auto d = affine_data(A, [](double) { return Eigen::VectorXd::Zero(3); }, 0.9, 300, 12);
  LinearIdOptions o;
  const auto r = iterate_linear_id(d, CollocationGrid(1), o);
  for (const auto& Aj : r.model.A) CHECK((Aj - A).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.K.values.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.active >= d.size() / 2);

  o.trim_fraction = 0.0;
  const auto all = iterate_linear_id(d, CollocationGrid(1), o);
  CHECK(all.active == d.size());
}

TEST_CASE("weighted least squares optimality") {
  // gradient of Σ δ ‖y − Ãx̃‖² vanishes at the fitted model
  const Eigen::MatrixXd A = stable_matrix(2, 13);
  auto d = affine_data(A, [](double) { return Eigen::VectorXd::Zero(2); }, 0.9, 200, 14);
  for (int k = 0; k < d.size(); ++k) d.y(0, k) += 0.1 * d.x(0, k) * d.x(1, k);
  const CollocationGrid g(1);
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(d.size(), 0.5, 2.0);
  const AffineModel m = fit_affine(d, w, g);
  auto loss = [&](const AffineModel& mm) {
    double s = 0.0;
    for (int k = 0; k < d.size(); ++k)
      s += w(k) * (d.y.col(k) - mm.A_at(d.theta(k)) * d.x.col(k) - mm.b_at(d.theta(k))).squaredNorm();
    return s;
  };
  const double h = 1e-5;
  for (int j = 0; j < g.size(); ++j)
    for (int e = 0; e < 4; ++e) {
      AffineModel p = m, q = m;
      p.A[j].data()[e] += h;
      q.A[j].data()[e] -= h;
      CHECK(std::abs(loss(p) - loss(q)) / (2 * h) < 1e-6);
    }
}

TEST_CASE("affine model text round trip") {
  AffineModel m;
  m.grid = CollocationGrid(1);
  m.A.assign(3, Eigen::MatrixXd::Random(2, 2));
  m.b = Eigen::MatrixXd::Random(2, 3);
  std::stringstream ss;
  write_affine_model(ss, m);
  const AffineModel r = read_affine_model(ss);
  CHECK(r.grid == m.grid);
  CHECK((r.A[2] - m.A[2]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.b - m.b).cwiseAbs().maxCoeff() == 0.0);
}
