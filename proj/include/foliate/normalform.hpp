#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "foliate/manifold.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

/// Complex diagonalization of the linear part of R: z_c = Uᵈ(θ) z and
/// Rᵈ(z_c, θ) = Uᵈ(θ+ω) R(Uᵈ(θ)⁻¹ z_c, θ), whose linear part is diag(λ).
struct Diagonalization {
  CollocationGrid grid;
  double omega = 0.0;
  Eigen::VectorXcd lambda;
  std::vector<Eigen::MatrixXcd> Ud;  // per node
  std::vector<int> partner;          // index of the conjugate coordinate (itself if real)
  ComplexPoly Rd;
};

Diagonalization diagonalize_linear(const RealPoly& R, double omega);

struct NormalFormTerm {
  int output = 0;
  int monomial = 0;
  int harmonic = 0;
  std::complex<double> divisor;
  std::complex<double> value;
};

/// T(R̆(z), θ+ω) = Rᵈ(T(z, θ), θ) with T near the identity and R̆ autonomous.
struct NormalFormModel {
  Diagonalization diag;
  int sigma = 1;
  double resonance_tol = 0.1;
  ComplexPoly T;       // node values
  ComplexPoly Rbreve;  // identical at every node
  std::vector<NormalFormTerm> resonant;

  int dim() const { return static_cast<int>(diag.lambda.size()); }
};

NormalFormModel solve_homological(const Diagonalization& d, double resonance_tol = 0.1);

/// Largest coefficient of T(R̆(z), θ+ω) − Rᵈ(T(z, θ), θ) over all nodes.
double conjugacy_residual(const NormalFormModel& nf);

/// W̆(z, θ) = W(Uᵈ(θ)⁻¹ T(z, θ), θ).
ComplexPoly compose_decoder(const RealPoly& W, const std::vector<Eigen::MatrixXcd>& Ud,
                            const ComplexPoly& T);

/// Largest violation of c_m = conj(c_{m̄}) where m̄ swaps conjugate variables;
/// zero when the polynomial is real on conjugate-paired arguments. When the
/// outputs are themselves conjugate coordinates pass out_partner, and row i is
/// compared with row out_partner[i].
double reality_defect(const ComplexPoly& p, const std::vector<int>& partner,
                      const std::vector<int>* out_partner = nullptr);

void write_normal_form(std::ostream& os, const NormalFormModel& nf);

}  // namespace foliate
