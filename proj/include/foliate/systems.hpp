#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace foliate {

/// Right-hand side ẋ = f(x, θ) of a system forced through the phase θ.
using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
using JacobianField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;

/// ẋ = f(x, θ), θ̇ = ω₀, with f 2π-periodic in θ.
struct ForcedSystem {
  std::string name;
  int dim = 0;
  VectorField rhs;
  JacobianField jacobian;  // optional, empty when unavailable
  double omega0 = 0.0;     // continuous forcing frequency (rad/time)
  std::map<std::string, double> params;
};

struct ShawPierreParams {
  double k = 1.0;
  double kappa = 0.2;
  double c = 1.0 / 32.0;
  double A = 0.0;
};

/// Two coupled oscillators, cubic spring on the first mass, both masses forced.
Eigen::VectorXd shaw_pierre_rhs(const Eigen::VectorXd& x, double theta,
                                const ShawPierreParams& p);
Eigen::MatrixXd shaw_pierre_jacobian(const Eigen::VectorXd& x, const ShawPierreParams& p);
ForcedSystem make_shaw_pierre(const ShawPierreParams& p, double omega0 = 0.79);

/// Optimal velocity car-following model with five cars on a ring. State is
/// (v₁..v₅, h₂..h₅); h₁ = L − Σ h₂..h₅, and the last car's maximal speed is
/// 1 + A cos θ.
struct TrafficParams {
  double alpha = 0.75;
  double L = 10.0;
  double A = 0.0;
};

inline constexpr int kTrafficCars = 5;
inline constexpr int kTrafficDim = 2 * kTrafficCars - 1;

Eigen::VectorXd traffic_rhs(const Eigen::VectorXd& x, double theta, const TrafficParams& p);
Eigen::MatrixXd traffic_jacobian(const Eigen::VectorXd& x, double theta,
                                 const TrafficParams& p);
/// Uniform flow: all headways L/n, all speeds V(L/n).
Eigen::VectorXd traffic_equilibrium(const TrafficParams& p);
ForcedSystem make_traffic(const TrafficParams& p, double omega0 = 0.4374);

/// Build a system by name ("shawpierre", "traffic") with parameter overrides.
ForcedSystem make_system(const std::string& name,
                         const std::map<std::string, double>& overrides,
                         double omega0);

/// Classical RK4 with `substeps` steps per sampling interval. Returns
/// steps+1 states, the first being x0. θ is advanced exactly as θ₀ + ω₀t.
std::vector<Eigen::VectorXd> integrate(const ForcedSystem& sys, const Eigen::VectorXd& x0,
                                       double theta0, double dt, int steps, int substeps);

/// Flow map over one sampling interval together with its derivative with
/// respect to the initial state (variational equations, RK4).
struct FlowWithJacobian {
  Eigen::VectorXd state;
  Eigen::MatrixXd jacobian;
};
FlowWithJacobian flow_with_jacobian(const ForcedSystem& sys, const Eigen::VectorXd& x0,
                                    double theta0, double dt, int substeps);

/// Triplets (xᵏ, yᵏ, θᵏ). Consecutive samples of one trajectory share the
/// trajectory id and satisfy xᵏ⁺¹ = yᵏ, θᵏ⁺¹ = θᵏ + ω.
struct TrajectoryDataset {
  int dim = 0;
  double dt = 1.0;
  double omega = 0.0;  // ω₀Δt mod 2π
  std::uint64_t seed = 0;
  Eigen::MatrixXd x;       // dim × N
  Eigen::MatrixXd y;       // dim × N
  Eigen::VectorXd theta;   // N
  std::vector<int> trajectory;

  int size() const { return static_cast<int>(x.cols()); }
};

struct DatasetOptions {
  int n_traj = 600;
  int n_points = 50;
  double dt = 0.8;
  double radius = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  int substeps = 16;
  /// Centre of the ball of initial conditions; zero when empty.
  Eigen::VectorXd centre;
};

TrajectoryDataset generate_dataset(const ForcedSystem& sys, const DatasetOptions& opt);

/// Delimited text: '#' header lines with n, dt, omega, seed, then a column
/// header and one row per triplet: x₁..xₙ, y₁..yₙ, θ, trajectory id.
void write_dataset(std::ostream& os, const TrajectoryDataset& data);
TrajectoryDataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const TrajectoryDataset& data);
TrajectoryDataset load_dataset(const std::string& path);

/// Keep the triplets whose index is listed.
TrajectoryDataset subset(const TrajectoryDataset& data, const std::vector<int>& indices);

}  // namespace foliate
