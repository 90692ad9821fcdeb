#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "foliate/fourier.hpp"

namespace foliate {

/// Eigenpairs of the discretized left-bundle problem λu(θ) = u(θ+ω)A(θ).
/// Column c of `vectors` stores u as an n × (2ℓ+1) array in column-major
/// order (entry (i, j) at index j·n + i).
struct BundleSpectrum {
  CollocationGrid grid;
  int dim = 0;
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;

  Eigen::MatrixXcd vector(int c) const;
};

BundleSpectrum bundle_eigenproblem(const CollocationGrid& grid,
                                   const std::vector<Eigen::MatrixXd>& A, double omega);

struct SpectrumCluster {
  std::vector<int> members;  // indices into the spectrum
  double lo = 0.0, hi = 0.0; // magnitude interval
  int representative = -1;
  std::complex<double> lambda;
};

/// 1-D k-means on log|λ|, sorted by decreasing magnitude.
std::vector<SpectrumCluster> cluster_spectrum(const Eigen::VectorXcd& values, int n_state,
                                              int ell);

/// Dominant harmonic |l| of an eigenvector (energy of ±l folded together).
int dominant_harmonic(const CollocationGrid& grid, const Eigen::MatrixXcd& u);

/// Member with the smallest dominant harmonic; ties broken by largest |λ|,
/// then nonnegative imaginary part, then index.
int select_representative(const BundleSpectrum& spec, const SpectrumCluster& cluster);

/// Real rows spanning a bundle and the constant conjugate block Λ.
struct RealBundle {
  std::vector<Eigen::MatrixXd> U;  // per node, rows × n
  Eigen::MatrixXd Lambda;          // rows × rows
  std::complex<double> lambda;
  int rows() const { return static_cast<int>(Lambda.rows()); }
};

RealBundle realify(const CollocationGrid& grid, std::complex<double> lambda,
                   const Eigen::MatrixXcd& u, int cluster_size);

/// Node-wise orthonormalization U^d = T U□ with the conjugated map
/// R□(θ) = T⁻¹(θ+ω) R^d T(θ).
struct OrthonormalFrame {
  std::vector<Eigen::MatrixXd> U;  // orthonormal rows
  std::vector<Eigen::MatrixXd> R;
  std::vector<Eigen::MatrixXd> T;
};

OrthonormalFrame orthonormalize(const CollocationGrid& grid, const std::vector<Eigen::MatrixXd>& Ud,
                                const Eigen::MatrixXd& Rd, double omega);

struct BundleDecomposition {
  BundleSpectrum spectrum;
  std::vector<SpectrumCluster> clusters;
  std::vector<RealBundle> bundles;  // one per cluster
};

BundleDecomposition decompose_bundles(const CollocationGrid& grid,
                                      const std::vector<Eigen::MatrixXd>& A, double omega);

/// Orthonormal left bundles of the selected clusters (U□, R□) and of the
/// rest (V□, S□).
struct BundleFrame {
  CollocationGrid grid;
  double omega = 0.0;
  std::vector<int> selected;  // 0-based cluster indices
  std::vector<Eigen::MatrixXd> Ubox, Vbox, Rbox, Sbox;

  int dim() const { return static_cast<int>(Ubox.front().cols()); }
  int dim_z() const { return static_cast<int>(Ubox.front().rows()); }
  int dim_zc() const { return static_cast<int>(Vbox.front().rows()); }
  /// Ubox/Vbox values at an arbitrary phase.
  Eigen::MatrixXd U_at(double theta) const;
  Eigen::MatrixXd V_at(double theta) const;
};

BundleFrame make_frame(const BundleDecomposition& dec, const std::vector<int>& selected,
                       double omega);

/// max over nodes of ‖R(θ)U(θ) − U(θ+ω)A(θ)‖, U(θ+ω) taken through 𝕊.
double invariance_residual(const CollocationGrid& grid, const std::vector<Eigen::MatrixXd>& U,
                           const std::vector<Eigen::MatrixXd>& R,
                           const std::vector<Eigen::MatrixXd>& A, double omega);

/// Vector-field form log(λ)/Δt of a map eigenvalue (principal branch).
std::complex<double> field_eigenvalue(std::complex<double> lambda, double dt);

void write_frame(std::ostream& os, const BundleFrame& f);
BundleFrame read_frame(std::istream& is);

}  // namespace foliate
