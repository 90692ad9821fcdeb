#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "foliate/fourier.hpp"
#include "foliate/systems.hpp"

namespace foliate {

/// F(x, θ) ≈ A(θ)x + b(θ), stored by node values.
struct AffineModel {
  CollocationGrid grid;
  std::vector<Eigen::MatrixXd> A;  // one n × n matrix per node
  Eigen::MatrixXd b;               // n × (2ℓ+1)

  int dim() const { return static_cast<int>(b.rows()); }
  Eigen::MatrixXd A_at(double theta) const;
  Eigen::VectorXd b_at(double theta) const;
};

/// δᵏ = 1/(ε² + ‖xᵏ − K(θᵏ)‖²).
Eigen::VectorXd scaling_weights(const TrajectoryDataset& data, const TorusFunction& K,
                                double epsilon);

/// Weighted least squares for the stacked coefficients of A and b.
AffineModel fit_affine(const TrajectoryDataset& data, const Eigen::VectorXd& weights,
                       const CollocationGrid& grid);

/// Invariant torus K(θ + ω) = A(θ)K(θ) + b(θ) on the grid.
TorusFunction solve_torus(const AffineModel& model, double omega);

/// max-norm of K𝕊^{−ω} − (A∘K + b).
double torus_residual(const AffineModel& model, const TorusFunction& K, double omega);

struct LinearIdOptions {
  double epsilon = 1.0 / 256.0;
  double trim_fraction = 0.1;
  double min_keep = 0.5;  // fraction of the data never trimmed away
  int max_iter = 30;
  double tol = 1e-14;
};

struct LinearIdResult {
  AffineModel model;
  TorusFunction K;
  Eigen::VectorXd weights;  // zero for trimmed points
  int active = 0;
  int iterations = 0;
  bool converged = false;
};

LinearIdResult iterate_linear_id(const TrajectoryDataset& data, const CollocationGrid& grid,
                                 const LinearIdOptions& opt = {});

/// Plain text: "ell=<ℓ> n=<n>", then for every node the n rows of A followed
/// by b as a single row.
void write_affine_model(std::ostream& os, const AffineModel& m);
AffineModel read_affine_model(std::istream& is);

}  // namespace foliate
