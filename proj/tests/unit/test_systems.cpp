#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "foliate/error.hpp"
#include "foliate/fourier.hpp"
#include "foliate/systems.hpp"

using namespace foliate;

TEST_CASE("shaw-pierre linear spectrum") {
  ShawPierreParams p;
  Eigen::EigenSolver<Eigen::MatrixXd> es(shaw_pierre_jacobian(Eigen::VectorXd::Zero(4), p));
  std::vector<double> w, z;
  for (int i = 0; i < 4; ++i) {
    const auto l = es.eigenvalues()(i);
    if (l.imag() > 0) {
      w.push_back(std::abs(l));
      z.push_back(-l.real() / std::abs(l));
    }
  }
  std::sort(w.begin(), w.end());
  std::sort(z.begin(), z.end());
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(1.7314).epsilon(1e-3));
  CHECK(z[0] == doctest::Approx(0.0156).epsilon(0.01));
  CHECK(z[1] == doctest::Approx(0.0271).epsilon(0.01));
}

TEST_CASE("jacobians match finite differences") {
  Eigen::VectorXd x(4);
  x << 0.3, -0.2, 0.1, 0.4;
  ShawPierreParams sp;
  sp.A = 0.25;
  const Eigen::MatrixXd J = shaw_pierre_jacobian(x, sp);
  TrafficParams tp;
  tp.A = 0.2;
  Eigen::VectorXd xt = traffic_equilibrium(tp) + 0.05 * Eigen::VectorXd::LinSpaced(kTrafficDim, -1, 1);
  const Eigen::MatrixXd Jt = traffic_jacobian(xt, 0.4, tp);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(4, i) * h;
    const Eigen::VectorXd fd = (shaw_pierre_rhs(x + e, 0.3, sp) - shaw_pierre_rhs(x - e, 0.3, sp)) / (2 * h);
    CHECK((fd - J.col(i)).cwiseAbs().maxCoeff() < 1e-7);
  }
  for (int i = 0; i < kTrafficDim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(kTrafficDim, i) * h;
    const Eigen::VectorXd fd = (traffic_rhs(xt + e, 0.4, tp) - traffic_rhs(xt - e, 0.4, tp)) / (2 * h);
    CHECK((fd - Jt.col(i)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("traffic equilibrium is a fixed point") {
  TrafficParams p;
  const Eigen::VectorXd x = traffic_equilibrium(p);
  CHECK(traffic_rhs(x, 0.0, p).cwiseAbs().maxCoeff() < 1e-14);
  const double h = p.L / kTrafficCars;
  CHECK(x(0) == doctest::Approx((h - 1) * (h - 1) / (1 + (h - 1) * (h - 1))));
}

TEST_CASE("rk4 reproduces a linear oscillator") {
  ForcedSystem s;
  s.dim = 2;
  s.rhs = [](const Eigen::VectorXd& x, double) {
    Eigen::VectorXd d(2);
    d << x(1), -x(0);
    return d;
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const auto traj = integrate(s, x0, 0.0, 0.5, 20, 16);
  REQUIRE(traj.size() == 21);
  CHECK(traj.back()(0) == doctest::Approx(std::cos(10.0)).epsilon(1e-6));

  s.jacobian = [](const Eigen::VectorXd&, double) {
    Eigen::MatrixXd J(2, 2);
    J << 0, 1, -1, 0;
    return J;
  };
  const auto f = flow_with_jacobian(s, x0, 0.0, 0.5, 16);
  CHECK(f.jacobian(0, 0) == doctest::Approx(std::cos(0.5)).epsilon(1e-8));
  CHECK(f.jacobian(0, 1) == doctest::Approx(std::sin(0.5)).epsilon(1e-8));
}

TEST_CASE("divergence is reported") {
  ForcedSystem s;
  s.dim = 1;
  s.rhs = [](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(x.array().square()); };
  Eigen::VectorXd x0(1);
  x0 << 10.0;
  CHECK_THROWS_AS(integrate(s, x0, 0.0, 1.0, 5, 2), NumericalError);
}

TEST_CASE("dataset generation") {
  DatasetOptions o;
  o.n_traj = 20;
  o.n_points = 10;
  const auto sys = make_system("shawpierre", {{"A", 0.25}}, 0.79);
  const auto d = generate_dataset(sys, o);
  // n_points states per trajectory give n_points − 1 triplets
  CHECK(d.size() == 20 * 9);
  CHECK(d.omega == doctest::Approx(std::fmod(0.79 * 0.8, 2 * std::numbers::pi)));
  for (int k = 0; k + 1 < d.size(); ++k) {
    if (d.trajectory[k] != d.trajectory[k + 1]) continue;
    CHECK((d.x.col(k + 1) - d.y.col(k)).norm() == 0.0);
    CHECK(normalize_angle(d.theta(k) + d.omega) == doctest::Approx(d.theta(k + 1)));
  }
  for (int t = 0; t < o.n_traj; ++t) CHECK(d.x.col(t * (o.n_points - 1)).norm() <= 1.0);

  const auto again = generate_dataset(sys, o);
  CHECK((again.x - d.x).cwiseAbs().maxCoeff() == 0.0);
  o.seed = 2;
  CHECK((generate_dataset(sys, o).x - d.x).cwiseAbs().maxCoeff() > 0.0);

  std::stringstream ss;
  write_dataset(ss, d);
  const auto back = read_dataset(ss);
  CHECK((back.x - d.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.y - d.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.omega == d.omega);
}

TEST_CASE("unforced amplitude decays") {
  const auto sys = make_system("shawpierre", {}, 0.79);
  Eigen::VectorXd x0(4);
  x0 << 0.05, 0.0, 0.0, 0.0;
  const auto traj = integrate(sys, x0, 0.0, 0.8, 50, 16);
  // energy-like norm over each stretch of ten samples
  double prev = 1e9;
  for (int b = 0; b < 5; ++b) {
    double m = 0.0;
    for (int k = 10 * b; k < 10 * b + 10; ++k) m = std::max(m, traj[k].norm());
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("unknown system parameters are rejected") {
  CHECK_THROWS_AS(make_system("shawpierre", {{"bogus", 1.0}}, 0.79), ValidationError);
  CHECK_THROWS_AS(make_system("pendulum", {}, 1.0), ValidationError);
}
