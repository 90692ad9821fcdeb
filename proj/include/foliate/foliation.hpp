#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foliate/bundles.hpp"
#include "foliate/fourier.hpp"
#include "foliate/polynomial.hpp"
#include "foliate/systems.hpp"

namespace foliate {

/// Data in the bundle frame: x∥ = U□(θ)(x − K(θ)), x⊥ = V□(θ)(x − K(θ)),
/// and y projected with the frame at θ + ω.
struct TransformedDataset {
  CollocationGrid grid;
  double omega = 0.0;
  int dim_z = 0, dim_zc = 0;
  Eigen::MatrixXd xp, xq, yp, yq;  // x∥, x⊥, y∥, y⊥ (components × N)
  Eigen::MatrixXd t, tw;           // interpolation weights at θᵏ and θᵏ + ω (nodes × N)
  Eigen::VectorXd theta;

  int size() const { return static_cast<int>(theta.size()); }
  int dim() const { return dim_z + dim_zc; }
  /// Stacked (x∥, x⊥) of point k.
  Eigen::VectorXd x(int k) const;
  Eigen::VectorXd y(int k) const;
};

TransformedDataset transform_dataset(const TrajectoryDataset& data, const BundleFrame& frame,
                                     const TorusFunction& K);

/// Inverse of the transform: x = K(θ) + [U□(θ); V□(θ)]⁻¹ (x∥, x⊥).
Eigen::VectorXd reconstruct(const BundleFrame& frame, const TorusFunction& K,
                            const Eigen::VectorXd& xp, const Eigen::VectorXd& xq, double theta);

/// Which nonlinear encoder monomials are free. Anchored: every monomial of U
/// contains an x∥ factor (so Uⁿˡ(0, x⊥) = 0), mirrored for V. Graph: every
/// monomial of U contains an x⊥ factor (so U(x∥, 0) = Uᶜ + x∥).
enum class ConstraintStyle { Anchored, Graph };

std::string to_string(ConstraintStyle s);
ConstraintStyle constraint_style_from_string(const std::string& s);

/// Encoders U, V over the stacked variables (x∥, x⊥) including their fixed
/// identity parts, conjugate maps R (in z ∈ Z) and S (in Z^c), and the inner
/// torus (K∥, K⊥) solving U = V = 0.
struct FoliationModel {
  CollocationGrid grid;
  double omega = 0.0;
  int dim_z = 0, dim_zc = 0, sigma = 1;
  ConstraintStyle style = ConstraintStyle::Anchored;
  RealPoly U, V, R, S;
  Eigen::MatrixXd Kp, Kq;  // per node

  int dim() const { return dim_z + dim_zc; }
  bool s_linear() const { return S.max_degree() == 1; }
};

/// Initial model from the bundle frame: R = R□, S = S□, everything else zero.
FoliationModel initial_model(const BundleFrame& frame, int sigma, bool s_linear,
                             ConstraintStyle style);

/// Monomial indices (over the n-variable basis) that a named block may change.
/// Block names: R, Uc, Ul, Unl<d>, S, Vc, Vl, Vnl<d>.
std::vector<std::string> block_names(const FoliationModel& m);
std::vector<int> block_monomials(const FoliationModel& m, const std::string& block);

/// Encoder values at a single point given the interpolation weights.
Eigen::VectorXd eval_U(const FoliationModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& t);
Eigen::VectorXd eval_V(const FoliationModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& t);

/// δᵏ = 1 + 1/(ε² + ‖x∥ − K∥‖² + ‖x⊥ − K⊥‖²).
Eigen::VectorXd foliation_weights(const FoliationModel& m, const TransformedDataset& d,
                                  double epsilon);

/// Σ δᵏ(‖R(U(xᵏ)) − U(yᵏ)‖² + ‖S(V(xᵏ)) − V(yᵏ)‖²).
double loss(const FoliationModel& m, const TransformedDataset& d, const Eigen::VectorXd& weights);

/// Node-wise Newton solve of U(K, θ) = 0, V(K, θ) = 0 from the stored torus.
void solve_inner_torus(FoliationModel& m, double tol = 1e-12, int max_iter = 50);

struct FitOptions {
  int sigma = 5;
  int max_sweeps = 40;
  double tol = 1e-6;  // relative loss decrease over a sweep
  int block_iterations = 2;
  double epsilon = 1.0 / 256.0;
  int s_linear = -1;  // −1: linear when n > 6
  ConstraintStyle style = ConstraintStyle::Anchored;
  double filter_quantile = 0.6;
  double filter_min = 0.3;
  std::set<std::string> only_blocks;  // empty: all blocks
  std::function<void(const std::string&)> log;
};

struct FitReport {
  int sweeps = 0;
  bool converged = false;
  std::vector<double> loss_history;
};

/// Batch coordinate descent with one damped Gauss–Newton problem per block.
class FoliationFitter {
 public:
  FoliationFitter(const TransformedDataset& data, FoliationModel initial, FitOptions opt);

  const FoliationModel& model() const { return model_; }
  const Eigen::VectorXd& weights() const { return delta_; }
  const std::vector<int>& v_active() const { return v_active_; }

  Eigen::VectorXd parameters(const std::string& block) const;
  void set_parameters(const std::string& block, const Eigen::VectorXd& p);

  /// Total loss with the current weights; the V side counts the filtered points only.
  double loss() const;
  /// Loss of the side a block belongs to, restricted to the points active for it.
  double block_loss(const std::string& block) const;
  /// Analytic gradient of block_loss with respect to the block parameters.
  Eigen::VectorXd gradient(const std::string& block) const;

  /// Damped Gauss–Newton iterations on one block with frozen weights. Returns
  /// the number of accepted steps.
  int minimize_block(const std::string& block, int iterations);
  /// Re-solve the inner torus and recompute δ.
  void refresh();
  /// Keep the configured quantile of the active points by ‖V‖, never fewer
  /// than filter_min of the whole dataset.
  void update_filter();

  FitReport run();

 private:
  struct Side;
  bool is_u_side(const std::string& block) const;
  double side_loss(bool u_side, const std::vector<int>* subset) const;
  void assemble(const std::string& block, Eigen::MatrixXd& H, Eigen::VectorXd& g,
                double& value) const;

  TransformedDataset data_;
  FoliationModel model_;
  FitOptions opt_;
  Eigen::MatrixXd phix_, phiy_;  // monomials of the encoder basis at every x, y
  Eigen::VectorXd delta_;
  std::vector<int> all_, v_active_;
  std::map<std::string, double> damping_;
};

FoliationModel fit_foliations(const TransformedDataset& data, const BundleFrame& frame,
                              const FitOptions& opt, FitReport* report = nullptr);

struct ErrorSummary {
  Eigen::VectorXd erel, amplitude;
  std::vector<double> bin_edges;
  std::vector<double> bin_median, bin_p90;
  std::vector<int> bin_count;
  /// Median over the points with amplitude ≤ max_amp (amplitudes below 1e−12
  /// are excluded).
  double median_below(double max_amp) const;
};

ErrorSummary relative_error(const FoliationModel& m, const TransformedDataset& d, int bins = 10);

void write_poly(std::ostream& os, const std::string& name, const RealPoly& p);
RealPoly read_poly(std::istream& is, const std::string& name, const CollocationGrid& grid);
void write_foliation(std::ostream& os, const FoliationModel& m);
FoliationModel read_foliation(std::istream& is);

}  // namespace foliate
