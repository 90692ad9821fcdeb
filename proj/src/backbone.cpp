#include "foliate/backbone.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/tools/roots.hpp>

#include "foliate/error.hpp"

namespace foliate {

using cd = std::complex<double>;

PolarMap::PolarMap(std::vector<cd> coeffs) : c_(std::move(coeffs)) {
  if (c_.size() < 2 || c_[1] == cd(0.0))
    throw ValidationError("polar map: linear coefficient must be nonzero");
}

cd PolarMap::q(double r) const {
  cd s = 0.0;
  for (std::size_t p = c_.size(); p-- > 0;) s = s * r + c_[p];
  return s;
}

double PolarMap::T(double r) const {
  // continue arg(q(r)/r) from r = 0
  auto h = [&](double x) {
    cd s = 0.0;
    for (std::size_t p = c_.size(); p-- > 1;) s = s * x + c_[p];
    return s;
  };
  constexpr int steps = 64;
  double phase = std::arg(c_[1]);
  cd prev = c_[1];
  for (int k = 1; k <= steps; ++k) {
    const cd cur = h(r * k / steps);
    phase += std::arg(cur / prev);
    prev = cur;
  }
  return phase;
}

PolarMap polar_from_normal_form(const NormalFormModel& nf, double tol) {
  if (nf.dim() != 2 || nf.diag.partner[0] != 1)
    throw ValidationError("polar map: the normal form must describe one complex mode");
  const ComplexPoly& Rb = nf.Rbreve;
  const MonomialSet& basis = *Rb.basis;
  std::vector<cd> q(basis.max_degree() + 1, 0.0);
  for (int m = 0; m < basis.size(); ++m) {
    const auto e = basis.exponents(m);
    if (e[0] - e[1] == 1) q[e[0] + e[1]] += Rb.coeffs[0](0, m);
  }
  // e^{−iβ}s(re^{iβ}, re^{−iβ}) must not depend on β
  const double r = 1.0;
  const PolarMap polar(q);
  const cd ref = polar.q(r);
  double defect = 0.0;
  for (int b = 0; b < 8; ++b) {
    const double beta = 2.0 * std::numbers::pi * b / 8.0;
    const Eigen::Vector2cd z(std::polar(r, beta), std::polar(r, -beta));
    Eigen::VectorXcd phi(basis.size());
    basis.evaluate(z, phi);
    const cd s = (Rb.coeffs[0].row(0) * phi)(0) * std::polar(1.0, -beta);
    defect = std::max(defect, std::abs(s - ref));
  }
  if (defect > tol * std::max(1.0, std::abs(ref))) {
    std::ostringstream msg;
    msg << "non-resonant term leaked (beta dependence " << defect << ")";
    throw NumericalError(msg.str());
  }
  return polar;
}

void FunctionFamily::evaluate(double r, double beta, double theta, Eigen::VectorXd* value,
                              Eigen::VectorXd* d_r, Eigen::VectorXd* d_beta) const {
  if (value) *value = value_(r, beta, theta);
  if (d_r) *d_r = dr_(r, beta, theta);
  if (d_beta) *d_beta = db_(r, beta, theta);
}

DecoderFamily::DecoderFamily(ComplexPoly Wbreve, const BundleFrame* frame, int quad_n)
    : W_(std::move(Wbreve)), quad_n_(quad_n) {
  if (W_.nvars() != 2) throw ValidationError("decoder family: expected one complex mode");
  const int M = W_.nodes(), n = W_.nout;
  for (int j = 0; j < M; ++j) {
    if (frame) {
      if (frame->dim() != n || frame->grid.size() != M)
        throw ValidationError("decoder family: frame does not match the decoder");
      Eigen::MatrixXd F(n, n);
      F << frame->Ubox[j], frame->Vbox[j];
      Pnodes_.push_back(F);
    } else {
      Pnodes_.push_back(Eigen::MatrixXd::Identity(n, n));
    }
  }
  for (int q = 0; q < quad_n_; ++q) cache_.push_back(slice(2.0 * std::numbers::pi * q / quad_n_));
}

DecoderFamily::Slice DecoderFamily::slice(double theta) const {
  const Eigen::VectorXd t = interpolation_weights(W_.grid, theta);
  Slice s;
  s.C = Eigen::MatrixXcd::Zero(W_.nout, W_.nmon());
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(W_.nout, W_.nout);
  for (int j = 0; j < W_.nodes(); ++j) {
    s.C += t(j) * W_.coeffs[j];
    F += t(j) * Pnodes_[j];
  }
  s.P = F.inverse();
  return s;
}

void DecoderFamily::evaluate(double r, double beta, double theta, Eigen::VectorXd* value,
                             Eigen::VectorXd* d_r, Eigen::VectorXd* d_beta) const {
  const double pos = theta / (2.0 * std::numbers::pi) * quad_n_;
  const long idx = std::lround(pos);
  Slice local;
  const Slice* s = nullptr;
  if (std::abs(pos - idx) < 1e-12 && idx >= 0 && idx < quad_n_) {
    s = &cache_[idx];
  } else {
    local = slice(theta);
    s = &local;
  }
  const cd e = std::polar(1.0, beta);
  const Eigen::Vector2cd z(r * e, r * std::conj(e));
  Eigen::VectorXcd phi(W_.nmon());
  W_.basis->evaluate(z, phi);
  if (value) {
    const Eigen::VectorXcd w = s->C * phi - s->C.col(0);
    *value = s->P * w.real();
  }
  if (d_r || d_beta) {
    const Eigen::MatrixXcd D = s->C * W_.basis->gradient<cd>(phi);
    if (d_r) *d_r = s->P * (D * Eigen::Vector2cd(e, std::conj(e))).real();
    if (d_beta)
      *d_beta = s->P * (D * Eigen::Vector2cd(cd(0, r) * e, cd(0, -r) * std::conj(e))).real();
  }
}

double kappa(const TorusFamily& W, double r, int quad_n) {
  double sum = 0.0;
  Eigen::VectorXd v;
  for (int q = 0; q < quad_n; ++q)
    for (int p = 0; p < quad_n; ++p) {
      W.evaluate(r, 2.0 * std::numbers::pi * p / quad_n, 2.0 * std::numbers::pi * q / quad_n, &v,
                 nullptr, nullptr);
      sum += v.squaredNorm();
    }
  return std::sqrt(sum / (double(quad_n) * quad_n));
}

double alpha_dot(const TorusFamily& W, double r, int quad_n) {
  double num = 0.0, den = 0.0;
  Eigen::VectorXd d1, d2;
  for (int q = 0; q < quad_n; ++q)
    for (int p = 0; p < quad_n; ++p) {
      W.evaluate(r, 2.0 * std::numbers::pi * p / quad_n, 2.0 * std::numbers::pi * q / quad_n,
                 nullptr, &d1, &d2);
      num += d1.dot(d2);
      den += d2.squaredNorm();
    }
  if (!(den > 1e-300)) throw NumericalError("phase correction: vanishing angular derivative");
  return -num / den;
}

KappaInverse::KappaInverse(std::function<double(double)> kappa, double s_max, int checks)
    : kappa_(std::move(kappa)), s_max_(s_max) {
  if (!(s_max > 0.0)) throw ValidationError("kappa inverse: range must be positive");
  double prev = kappa_(0.0);
  for (int i = 1; i <= checks; ++i) {
    const double s = s_max * i / checks;
    const double k = kappa_(s);
    if (!(k > prev)) {
      std::ostringstream msg;
      msg << "kappa is not increasing on [" << s_max * (i - 1) / checks << ", " << s << "]";
      throw NumericalError(msg.str());
    }
    prev = k;
  }
  r_max_ = prev;
}

double KappaInverse::operator()(double r) const {
  const double k0 = kappa_(0.0);
  if (r <= k0) return 0.0;
  if (r > r_max_ * (1.0 + 1e-12)) throw ValidationError("kappa inverse: amplitude out of range");
  if (r >= r_max_) return s_max_;
  auto f = [&](double s) { return kappa_(s) - r; };
  boost::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      f, 0.0, s_max_, k0 - r, r_max_ - r, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (lo + hi);
}

PhaseCorrection::PhaseCorrection(const TorusFamily& W, double s_max, int intervals, int quad_n)
    : s_max_(s_max) {
  if (!(s_max > 0.0) || intervals < 2) throw ValidationError("phase correction: bad grid");
  std::vector<double> s, a, da;
  for (int i = 0; i <= intervals; ++i) {
    s.push_back(s_max * i / intervals);
    // the integrand is regular at 0; sample just beside it
    da.push_back(alpha_dot(W, i == 0 ? 1e-5 * s_max : s.back(), quad_n));
  }
  a.assign(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i)
    a[i] = a[i - 1] + 0.5 * (s[i] - s[i - 1]) * (da[i] + da[i - 1]);
  using Hermite = boost::math::interpolators::cubic_hermite<std::vector<double>>;
  auto h = std::make_shared<Hermite>(std::move(s), std::move(a), std::move(da));
  value_ = [h](double x) { return (*h)(x); };
  prime_ = [h](double x) { return h->prime(x); };
}

double PhaseCorrection::operator()(double s) const {
  if (s <= 0.0) return 0.0;
  if (s > s_max_ * (1.0 + 1e-12)) throw ValidationError("phase correction: radius out of range");
  return value_(std::min(s, s_max_));
}

double PhaseCorrection::derivative(double s) const { return prime_(std::clamp(s, 0.0, s_max_)); }

double monotone_limit(const TorusFamily& W, double s_limit, int checks, int quad_n) {
  double prev = kappa(W, 0.0, quad_n), last = 0.0;
  for (int i = 1; i <= checks; ++i) {
    const double s = s_limit * i / checks;
    const double k = kappa(W, s, quad_n);
    if (!(k > prev)) break;
    prev = k;
    last = s;
  }
  return last;
}

BackboneCurve compute_backbone(const PolarMap& polar, const TorusFamily& W, double dt,
                               const BackboneOptions& opt) {
  if (!(opt.r_max > 0.0)) throw ValidationError("backbone: r_max must be positive");
  if (opt.samples < 2) throw ValidationError("backbone: need at least two samples");
  if (!(dt > 0.0)) throw ValidationError("backbone: dt must be positive");
  auto kap = [&](double s) { return kappa(W, s, opt.quad_n); };
  const double k0 = kap(0.0);
  // bracket the normal-form radius reaching r_max
  const double h = 1e-6;
  const double slope = (kap(h) - k0) / h;
  if (!(slope > 0.0)) throw NumericalError("backbone: amplitude measure does not grow at zero");
  double s_max = opt.r_max / slope;
  for (int i = 0; kap(s_max) < opt.r_max; ++i) {
    if (i == 60) throw NumericalError("backbone: amplitude measure never reaches r_max");
    s_max *= 1.25;
  }
  const KappaInverse rho(kap, s_max);
  const PhaseCorrection alpha(W, s_max, opt.alpha_intervals, opt.quad_n);

  BackboneCurve b;
  b.dt = dt;
  const cd lambda = polar.coefficients()[1];
  b.omega0 = std::arg(lambda) / dt;
  b.zeta0 = -std::log(std::abs(lambda)) / std::arg(lambda);
  for (int i = 0; i < opt.samples; ++i) {
    const double r = opt.r_max * i / (opt.samples - 1);
    b.r.push_back(r);
    if (i == 0) {
      b.omega.push_back(b.omega0);
      b.zeta.push_back(b.zeta0);
      b.rho.push_back(0.0);
      b.alpha.push_back(0.0);
      continue;
    }
    const double s = rho(r);
    const double Rs = polar.R(s);
    const double Rt = kap(Rs);
    const double Tt = polar.T(s) + alpha(s) - alpha(Rs);
    b.omega.push_back(Tt / dt);
    b.zeta.push_back(-std::log(Rt / r) / Tt);
    b.rho.push_back(s);
    b.alpha.push_back(alpha(s));
  }
  return b;
}

void write_backbone(std::ostream& os, const BackboneCurve& b) {
  os << std::setprecision(12);
  os << "# dt=" << b.dt << '\n';
  os << "# omega = Ttilde/dt; zeta = -log(Rtilde(r)/r)/Ttilde, positive for decay\n";
  os << "r,omega,zeta,rho,alpha\n";
  for (std::size_t i = 0; i < b.r.size(); ++i)
    os << b.r[i] << ',' << b.omega[i] << ',' << b.zeta[i] << ',' << b.rho[i] << ',' << b.alpha[i]
       << '\n';
}

}  // namespace foliate
