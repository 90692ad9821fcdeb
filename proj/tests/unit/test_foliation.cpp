#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "foliate/error.hpp"
#include "foliate/foliation.hpp"

using namespace foliate;

namespace {

void randomize_block(FoliationFitter& f, const std::string& block, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd p = f.parameters(block);
  for (int i = 0; i < p.size(); ++i) p(i) += scale * nd(rng);
  f.set_parameters(block, p);
}

}  // namespace

TEST_CASE("transform and reconstruct") {
  const auto s = fixtures::stage_linear(1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd x = reconstruct(s.frame, s.lin.K, s.td.xp.col(k), s.td.xq.col(k), s.data.theta(k));
    CHECK((x - s.data.x.col(k)).norm() < 1e-8);
  }
  for (int k = 0; k < s.td.size(); ++k)
    CHECK((s.td.tw.col(k) - shift_matrix(s.td.grid, s.td.omega).entries.transpose() * s.td.t.col(k))
              .cwiseAbs()
              .maxCoeff() < 1e-11);
}

TEST_CASE("initial model is exactly invariant on linear data") {
  const auto s = fixtures::stage_linear(2);
  FoliationModel m = initial_model(s.frame, 3, false, ConstraintStyle::Anchored);
  const Eigen::VectorXd w = foliation_weights(m, s.td, 1.0 / 256);
  CHECK(loss(m, s.td, w) < 1e-16 * s.td.size());
  CHECK(loss(m, s.td, 2.0 * w) == doctest::Approx(2.0 * loss(m, s.td, w)));
  // encoder is x∥ when only the identity part is set
  const Eigen::VectorXd x = s.td.x(3);
  CHECK((eval_U(m, x, s.td.t.col(3)) - s.td.xp.col(3)).norm() < 1e-15);
}

TEST_CASE("structural constraints of the nonlinear blocks") {
  const auto s = fixtures::stage_linear(3);
  for (auto style : {ConstraintStyle::Anchored, ConstraintStyle::Graph}) {
    FoliationModel m = initial_model(s.frame, 4, false, style);
    FoliationFitter f(s.td, m, FitOptions{});
    std::mt19937_64 rng(4);
    for (const auto& b : block_names(m))
      if (b.find("nl") != std::string::npos) randomize_block(f, b, 1.0, rng);
    const FoliationModel& r = f.model();
    const RealPoly Unl = r.U.degree_range(2, 4), Vnl = r.V.degree_range(2, 4);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd x(4);
      x << 0, 0, nd(rng), nd(rng);  // x∥ = 0
      Eigen::VectorXd y(4);
      y << nd(rng), nd(rng), 0, 0;  // x⊥ = 0
      const bool anchored = style == ConstraintStyle::Anchored;
      CHECK(Unl.eval_node(1, anchored ? x : y).norm() == 0.0);
      CHECK(Vnl.eval_node(1, anchored ? y : x).norm() == 0.0);
    }
  }
}

TEST_CASE("encoder evaluation against monomial sums") {
  const auto s = fixtures::stage_linear(5);
  FoliationModel m = initial_model(s.frame, 3, false, ConstraintStyle::Anchored);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (auto& c : m.U.coeffs)
    for (int i = 0; i < c.size(); ++i) c.data()[i] += 0.1 * nd(rng);
  const Eigen::VectorXd x = s.td.x(10), t = s.td.t.col(10);
  Eigen::VectorXd naive = Eigen::VectorXd::Zero(2);
  const MonomialSet& b = *m.U.basis;
  for (int j = 0; j < m.grid.size(); ++j)
    for (int mon = 0; mon < b.size(); ++mon) {
      double v = 1.0;
      for (int i = 0; i < 4; ++i) v *= std::pow(x(i), b.exponents(mon)[i]);
      naive += t(j) * m.U.coeffs[j].col(mon) * v;
    }
  CHECK((eval_U(m, x, t) - naive).norm() < 1e-12);
}

TEST_CASE("block gradients match finite differences") {
  const auto s = fixtures::stage_linear(7);
  FoliationModel m = initial_model(s.frame, 3, false, ConstraintStyle::Anchored);
  FoliationFitter f(s.td, m, FitOptions{});
  std::mt19937_64 rng(8);
  for (const auto& b : block_names(m)) randomize_block(f, b, 0.05, rng);
  for (const auto& b : block_names(f.model())) {
    const Eigen::VectorXd g = f.gradient(b);
    const Eigen::VectorXd p = f.parameters(b);
    for (int i = 0; i < p.size(); i += std::max<int>(1, static_cast<int>(p.size()) / 5)) {
      const double h = 1e-6;
      Eigen::VectorXd q = p;
      q(i) += h;
      f.set_parameters(b, q);
      const double lp = f.block_loss(b);
      q(i) -= 2 * h;
      f.set_parameters(b, q);
      const double lm = f.block_loss(b);
      f.set_parameters(b, p);
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - g(i)) <= 1e-5 * std::max(1.0, std::abs(g(i))));
    }
  }
}

TEST_CASE("accepted block steps never increase the loss") {
  const auto s = fixtures::stage_linear(9);
  FoliationFitter f(s.td, initial_model(s.frame, 3, false, ConstraintStyle::Anchored), FitOptions{});
  std::mt19937_64 rng(10);
  for (const auto& b : block_names(f.model())) randomize_block(f, b, 0.02, rng);
  for (const auto& b : block_names(f.model())) {
    const double before = f.block_loss(b);
    f.minimize_block(b, 3);
    CHECK(f.block_loss(b) <= before);
  }
}

TEST_CASE("R block solves the weighted linear least squares problem") {
  const auto s = fixtures::stage_linear(11);
  FitOptions o;
  o.only_blocks = {"R"};
  FoliationFitter f(s.td, initial_model(s.frame, 2, false, ConstraintStyle::Anchored), o);
  std::mt19937_64 rng(12);
  randomize_block(f, "R", 0.1, rng);
  f.minimize_block("R", 5);
  CHECK(f.gradient("R").cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, f.block_loss("R")) + 1e-12);
}

TEST_CASE("fit on linear data keeps the nonlinear terms at zero") {
  const auto s = fixtures::stage_linear(13);
  FitOptions o;
  o.sigma = 3;
  o.max_sweeps = 3;
  const FoliationModel m = fit_foliations(s.td, s.frame, o);
  CHECK(m.U.degree_range(2, 3).max_abs() < 1e-8);
  CHECK(m.V.degree_range(2, 3).max_abs() < 1e-8);
  const ErrorSummary e = relative_error(m, s.td);
  CHECK(e.erel.maxCoeff() < 1e-10);
}

TEST_CASE("inner torus") {
  const auto s = fixtures::stage_linear(14);
  FoliationModel m = initial_model(s.frame, 3, false, ConstraintStyle::Anchored);
  solve_inner_torus(m);
  CHECK(m.Kp.cwiseAbs().maxCoeff() == 0.0);
  for (auto& c : m.U.coeffs) {
    c(0, 0) = 0.1;
    c(1, 0) = -0.2;
  }
  solve_inner_torus(m);
  CHECK(m.Kp(0, 0) == doctest::Approx(-0.1));
  CHECK(m.Kp(1, 2) == doctest::Approx(0.2));
  std::mt19937_64 rng(15);
  std::normal_distribution<double> nd;
  for (auto* p : {&m.U, &m.V})
    for (auto& c : p->coeffs)
      for (int mon = 5; mon < c.cols(); ++mon) c.col(mon) += 0.05 * Eigen::Vector2d(nd(rng), nd(rng));
  solve_inner_torus(m);
  for (int j = 0; j < m.grid.size(); ++j) {
    Eigen::VectorXd k(4);
    k << m.Kp.col(j), m.Kq.col(j);
    CHECK(m.U.eval_node(j, k).norm() < 1e-10);
    CHECK(m.V.eval_node(j, k).norm() < 1e-10);
  }
}

TEST_CASE("relative error grows linearly with a perturbation of R") {
  const auto s = fixtures::stage_linear(16);
  const FoliationModel m = initial_model(s.frame, 2, false, ConstraintStyle::Anchored);
  auto median = [&](double eta) {
    FoliationModel p = m;
    for (auto& c : p.R.coeffs) c(0, 1) += eta;
    return relative_error(p, s.td).median_below(1e9);
  };
  const double a = median(1e-4), b = median(2e-4);
  CHECK(b / a == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("foliation text round trip") {
  const auto s = fixtures::stage_linear(17);
  FoliationModel m = initial_model(s.frame, 3, true, ConstraintStyle::Graph);
  m.U.coeffs[1](0, 7) = 0.25;
  std::stringstream ss;
  write_foliation(ss, m);
  const FoliationModel r = read_foliation(ss);
  CHECK(r.sigma == 3);
  CHECK(r.style == ConstraintStyle::Graph);
  CHECK(r.s_linear());
  CHECK(r.U.coeffs[1](0, 7) == 0.25);
  CHECK((r.R.coeffs[0] - m.R.coeffs[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(constraint_style_from_string("sideways"), ValidationError);
}
