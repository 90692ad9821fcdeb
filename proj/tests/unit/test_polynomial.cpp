#include <doctest.h>

#include <cmath>
#include <random>

#include "foliate/polynomial.hpp"

using namespace foliate;

namespace {

// Monomial value straight from its exponents.
double naive_monomial(const MonomialSet& s, int m, const Eigen::VectorXd& x) {
  double v = 1.0;
  const auto e = s.exponents(m);
  for (int i = 0; i < s.nvars(); ++i) v *= std::pow(x(i), e[i]);
  return v;
}

}  // namespace

TEST_CASE("monomial set layout") {
  const MonomialSet s(3, 4);
  CHECK(s.size() == 35);  // C(3+4, 4)
  CHECK(s.degree_begin(0) == 0);
  CHECK(s.degree_begin(1) == 1);
  CHECK(s.degree_begin(2) == 4);
  CHECK(s.degree_end(4) == 35);
  for (int m = 0; m < s.size(); ++m) {
    const auto e = s.exponents(m);
    CHECK(s.index(e) == m);
    int d = 0;
    for (int v : e) d += v;
    CHECK(d == s.degree(m));
  }
  const int x0 = 1, x1 = 2;
  const int p = s.product(x0, x1);
  CHECK(s.exponents(p)[0] == 1);
  CHECK(s.exponents(p)[1] == 1);
  CHECK(s.product(s.degree_begin(3), s.degree_begin(2)) == -1);
}

TEST_CASE("monomial evaluation and gradient") {
  const MonomialSet s(3, 5);
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 0.7;
  Eigen::VectorXd phi(s.size());
  s.evaluate(x, phi);
  for (int m = 0; m < s.size(); ++m) CHECK(phi(m) == doctest::Approx(naive_monomial(s, m, x)).epsilon(1e-13));
  const Eigen::MatrixXd g = s.gradient<double>(phi);
  const double h = 1e-6;
  for (int v = 0; v < 3; ++v) {
    Eigen::VectorXd xp = x, xm = x, pp(s.size()), pm(s.size());
    xp(v) += h;
    xm(v) -= h;
    s.evaluate(xp, pp);
    s.evaluate(xm, pm);
    const Eigen::VectorXd fd = (pp - pm) / (2 * h);
    CHECK((fd - g.col(v)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("composition matches evaluation") {
  // z² ∘ (z + z²) = z² + 2z³ + z⁴, truncated at degree 3
  const CollocationGrid g(0);
  RealPoly outer(1, 1, 3, g), inner(1, 1, 3, g);
  outer.coeffs[0](0, 2) = 1.0;
  inner.coeffs[0](0, 1) = 1.0;
  inner.coeffs[0](0, 2) = 1.0;
  const RealPoly c = compose(outer, inner);
  CHECK(c.coeffs[0](0, 2) == doctest::Approx(1.0));
  CHECK(c.coeffs[0](0, 3) == doctest::Approx(2.0));
  CHECK(c.coeffs[0](0, 1) == 0.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  const CollocationGrid g2(1);
  RealPoly A(2, 3, 3, g2), B(3, 2, 3, g2);
  for (auto* p : {&A, &B})
    for (auto& m : p->coeffs)
      for (int i = 0; i < m.size(); ++i) m.data()[i] = 0.5 * n(rng);
  for (auto& m : B.coeffs) m.col(0).setZero();
  const RealPoly AB = compose(A, B);
  // agreement on the terms up to degree 3 shows up as O(|z|⁴) differences
  for (double h : {1e-2, 5e-3}) {
    Eigen::VectorXd z(2);
    z << h, -0.7 * h;
    const Eigen::VectorXd direct = A.eval_node(1, B.eval_node(1, z));
    const Eigen::VectorXd composed = AB.eval_node(1, z);
    CHECK((direct - composed).norm() < 50 * std::pow(h, 4));
  }
}

TEST_CASE("complex composition and linear helpers") {
  const CollocationGrid g(0);
  std::vector<Eigen::MatrixXcd> L{Eigen::MatrixXcd::Identity(2, 2) * std::complex<double>(0, 2)};
  const ComplexPoly lin = linear_poly<std::complex<double>>(L, 3, g);
  const ComplexPoly id = identity_poly<std::complex<double>>(2, 3, g);
  const ComplexPoly c = compose(lin, id);
  CHECK((c.coeffs[0] - lin.coeffs[0]).cwiseAbs().maxCoeff() < 1e-15);
  const ComplexPoly m = left_multiply(L, id);
  CHECK(std::abs(m.coeffs[0](1, 2) - std::complex<double>(0, 2)) < 1e-15);
  const ComplexPoly r = rebase(id, 1);
  CHECK(r.max_degree() == 1);
  CHECK(r.nmon() == 3);
}

TEST_CASE("shifted polynomial evaluates ahead in phase") {
  const CollocationGrid g(2);
  RealPoly p(1, 1, 2, g);
  for (int j = 0; j < g.size(); ++j) p.coeffs[j](0, 2) = std::cos(g.node(j));
  const RealPoly s = p.shifted(0.4);
  Eigen::VectorXd x(1);
  x << 0.5;
  CHECK(s.eval(x, 1.0)(0) == doctest::Approx(p.eval(x, 1.4)(0)).epsilon(1e-12));
}
