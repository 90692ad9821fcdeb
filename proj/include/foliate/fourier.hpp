#pragma once

#include <complex>
#include <iosfwd>

#include <Eigen/Dense>

namespace foliate {

/// Wraps an angle into [0, 2π).
double normalize_angle(double theta);

/// Uniform collocation grid with 2ℓ+1 nodes ϑⱼ = 2πj/(2ℓ+1), j = 0..2ℓ.
class CollocationGrid {
 public:
  explicit CollocationGrid(int ell = 0);

  int ell() const { return ell_; }
  int size() const { return 2 * ell_ + 1; }
  double node(int j) const;
  Eigen::VectorXd nodes() const;

  bool operator==(const CollocationGrid&) const = default;

 private:
  int ell_;
};

/// Dirichlet cardinal kernel γ(θ) = sin((2ℓ+1)θ/2) / ((2ℓ+1) sin(θ/2)).
double gamma(double theta, int ell);

/// Interpolation weights tⱼ = γ(θ − ϑⱼ) of an angle on the grid.
Eigen::VectorXd interpolation_weights(const CollocationGrid& grid, double theta);

/// Function 𝕋 → ℝⁿ stored by its values on the collocation nodes.
struct TorusFunction {
  CollocationGrid grid;
  Eigen::MatrixXd values;  // n × (2ℓ+1)

  TorusFunction() = default;
  TorusFunction(CollocationGrid g, Eigen::MatrixXd v);

  int dim() const { return static_cast<int>(values.rows()); }
  Eigen::VectorXd operator()(double theta) const;
};

Eigen::VectorXd interpolate(const TorusFunction& f, double theta);

/// Discrete shift operator. Entries 𝕊ⱼₖ = γ(ϑₖ − ϑⱼ − ω); for grid values X
/// (rows are coordinates), X·𝕊^ω holds the samples of x(θ − ω) and X·𝕊^{−ω}
/// those of x(θ + ω).
struct ShiftMatrix {
  CollocationGrid grid;
  double omega = 0.0;
  Eigen::MatrixXd entries;
};

ShiftMatrix shift_matrix(const CollocationGrid& grid, double omega);

/// Discrete Fourier coefficients ũₗ = Σⱼ e^{−ilϑⱼ} uⱼ, columns ordered
/// l = −ℓ..ℓ.
Eigen::MatrixXcd fourier_coefficients(const CollocationGrid& grid,
                                      const Eigen::MatrixXcd& values);
Eigen::MatrixXcd fourier_coefficients(const TorusFunction& f);

/// Inverse of fourier_coefficients.
Eigen::MatrixXcd fourier_synthesis(const CollocationGrid& grid,
                                   const Eigen::MatrixXcd& coefficients);

/// Plain text: header line "ell=<ℓ>", then one row per coordinate.
void write_torus_function(std::ostream& os, const TorusFunction& f);
TorusFunction read_torus_function(std::istream& is);

}  // namespace foliate
