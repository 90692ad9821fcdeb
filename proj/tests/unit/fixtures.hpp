#pragma once
// Shared synthetic data for the unit tests.
#include <cmath>
#include <numbers>
#include <random>

#include "foliate/bundles.hpp"
#include "foliate/foliation.hpp"
#include "foliate/linearid.hpp"

namespace fixtures {

// Trajectories of x ↦ A x with two complex pairs, phase advancing by ω.
inline foliate::TrajectoryDataset linear_trajectories(std::uint64_t seed, double omega = 0.7,
                                                      int n_traj = 100, int n_points = 15) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::Matrix4d D = Eigen::Matrix4d::Zero();
  D.block<2, 2>(0, 0) << 0.96 * std::cos(0.6), -0.96 * std::sin(0.6), 0.96 * std::sin(0.6), 0.96 * std::cos(0.6);
  D.block<2, 2>(2, 2) << 0.8 * std::cos(1.4), -0.8 * std::sin(1.4), 0.8 * std::sin(1.4), 0.8 * std::cos(1.4);
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 16; ++i) P.data()[i] += 0.3 * nd(rng);
  const Eigen::Matrix4d A = P * D * P.inverse();
  foliate::TrajectoryDataset d;
  d.dim = 4;
  d.omega = omega;
  const int N = n_traj * n_points;
  d.x.resize(4, N);
  d.y.resize(4, N);
  d.theta.resize(N);
  d.trajectory.resize(N);
  int k = 0;
  for (int t = 0; t < n_traj; ++t) {
    Eigen::Vector4d x(nd(rng), nd(rng), nd(rng), nd(rng));
    x *= std::pow(u(rng), 0.25) / x.norm();
    double th = 2 * std::numbers::pi * u(rng);
    for (int p = 0; p < n_points; ++p, ++k) {
      d.x.col(k) = x;
      x = A * x;
      d.y.col(k) = x;
      d.theta(k) = th;
      d.trajectory[k] = t;
      th = foliate::normalize_angle(th + omega);
    }
  }
  return d;
}

struct Staged {
  foliate::TrajectoryDataset data;
  foliate::LinearIdResult lin;
  foliate::BundleDecomposition dec;
  foliate::BundleFrame frame;
  foliate::TransformedDataset td;
};

inline Staged stage_linear(std::uint64_t seed, int ell = 1) {
  Staged s;
  s.data = linear_trajectories(seed);
  s.lin = foliate::iterate_linear_id(s.data, foliate::CollocationGrid(ell));
  s.dec = foliate::decompose_bundles(s.lin.model.grid, s.lin.model.A, s.data.omega);
  s.frame = foliate::make_frame(s.dec, {0}, s.data.omega);
  s.td = foliate::transform_dataset(s.data, s.frame, s.lin.K);
  return s;
}

}  // namespace fixtures
