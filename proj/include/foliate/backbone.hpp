#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foliate/bundles.hpp"
#include "foliate/normalform.hpp"

namespace foliate {

/// s(re^{iβ}, re^{−iβ}) = e^{iβ} q(r); R(r) = |q(r)|, T(r) = arg q(r)
/// continued from T(0) = arg λ.
class PolarMap {
 public:
  PolarMap() = default;
  /// Coefficients of q(r) = Σ_p c_p r^p.
  explicit PolarMap(std::vector<std::complex<double>> coeffs);

  std::complex<double> q(double r) const;
  double R(double r) const { return std::abs(q(r)); }
  double T(double r) const;
  const std::vector<std::complex<double>>& coefficients() const { return c_; }

 private:
  std::vector<std::complex<double>> c_;
};

/// Builds the polar map of the first complex coordinate of a two-dimensional
/// normal form; throws "non-resonant term leaked" when e^{−iβ}s depends on β.
PolarMap polar_from_normal_form(const NormalFormModel& nf, double tol = 1e-8);

/// Two-parameter torus family Ŵ(r, β, θ) in a Euclidean space.
class TorusFamily {
 public:
  virtual ~TorusFamily() = default;
  virtual void evaluate(double r, double beta, double theta, Eigen::VectorXd* value,
                        Eigen::VectorXd* d_r, Eigen::VectorXd* d_beta) const = 0;
};

/// Family built from callables, mostly for tests.
class FunctionFamily : public TorusFamily {
 public:
  using Fn = std::function<Eigen::VectorXd(double, double, double)>;
  FunctionFamily(Fn value, Fn d_r, Fn d_beta)
      : value_(std::move(value)), dr_(std::move(d_r)), db_(std::move(d_beta)) {}
  void evaluate(double r, double beta, double theta, Eigen::VectorXd* value, Eigen::VectorXd* d_r,
                Eigen::VectorXd* d_beta) const override;

 private:
  Fn value_, dr_, db_;
};

/// Ŵ(r, β, θ) = P(θ)(W̆(re^{iβ}, re^{−iβ}, θ) − W̆(0, θ)) where P maps the
/// bundle coordinates (x∥, x⊥) back to physical displacements from the torus.
/// The frame may be omitted, in which case P = I.
class DecoderFamily : public TorusFamily {
 public:
  DecoderFamily(ComplexPoly Wbreve, const BundleFrame* frame, int quad_n = 64);
  void evaluate(double r, double beta, double theta, Eigen::VectorXd* value, Eigen::VectorXd* d_r,
                Eigen::VectorXd* d_beta) const override;

 private:
  struct Slice {
    Eigen::MatrixXcd C;  // Σ_j t_j W̆_j
    Eigen::MatrixXd P;
  };
  Slice slice(double theta) const;

  ComplexPoly W_;
  std::vector<Eigen::MatrixXd> Pnodes_;
  int quad_n_;
  std::vector<Slice> cache_;
};

/// κ(r) = sqrt of the mean of |Ŵ(r, β, θ)|² on a quad_n × quad_n grid.
double kappa(const TorusFamily& W, double r, int quad_n = 64);

/// α̇(r) = −∫⟨D₂Ŵ, D₂Ŵ⟩⁻¹ ∫⟨D₁Ŵ, D₂Ŵ⟩.
double alpha_dot(const TorusFamily& W, double r, int quad_n = 64);

/// Monotone inverse of a callable κ on [0, s_max].
class KappaInverse {
 public:
  KappaInverse(std::function<double(double)> kappa, double s_max, int checks = 200);
  double operator()(double r) const;
  double s_max() const { return s_max_; }
  double r_max() const { return r_max_; }

 private:
  std::function<double(double)> kappa_;
  double s_max_, r_max_;
};

/// α(s) = ∫₀ˢ α̇ by cumulative trapezoid on a uniform grid, evaluated through
/// Hermite interpolation with the exact α̇ at the nodes.
class PhaseCorrection {
 public:
  PhaseCorrection(const TorusFamily& W, double s_max, int intervals = 256, int quad_n = 64);
  double operator()(double s) const;
  double derivative(double s) const;

 private:
  double s_max_ = 0.0;
  std::function<double(double)> value_, prime_;
};

struct BackboneCurve {
  double dt = 1.0;
  std::vector<double> r, omega, zeta, rho, alpha;
  /// Linear limits ω(0) = arg λ/Δt and ζ(0) = −log|λ|/arg λ.
  double omega0 = 0.0, zeta0 = 0.0;
};

struct BackboneOptions {
  double r_max = 0.0;  // physical amplitude; ≤ 0 requires set by caller
  int samples = 100;
  int quad_n = 64;
  int alpha_intervals = 256;
};

/// Instantaneous frequency and damping ratio, ζ positive for decay.
BackboneCurve compute_backbone(const PolarMap& polar, const TorusFamily& W, double dt,
                               const BackboneOptions& opt);

/// Largest s ≤ s_limit on which κ increases; used to cap the amplitude range.
double monotone_limit(const TorusFamily& W, double s_limit, int checks = 200, int quad_n = 64);

void write_backbone(std::ostream& os, const BackboneCurve& b);

}  // namespace foliate
