#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "foliate/backbone.hpp"
#include "foliate/bundles.hpp"
#include "foliate/foliation.hpp"
#include "foliate/linearid.hpp"
#include "foliate/manifold.hpp"
#include "foliate/normalform.hpp"
#include "foliate/systems.hpp"

namespace foliate {

struct PipelineConfig {
  // [data]
  std::string system = "shawpierre";
  std::string dataset;  // external data file; overrides the built-in system
  std::map<std::string, double> params;
  double omega0 = -1.0;  // negative: the system's default
  double dt = 0.8;
  int n_traj = 600;
  int n_points = 50;
  double radius = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  int substeps = 16;
  // [linear]
  int ell = 0;
  double epsilon = 1.0 / 256.0;
  double trim = 0.1;
  double min_keep = 0.5;
  int max_iter = 30;
  // [bundles], 1-based cluster indices
  std::vector<int> modes{1};
  // [foliation]
  int sigma = 5;
  int sweeps = 40;
  double tol = 1e-6;
  int block_iterations = 2;
  std::string style = "anchored";
  int s_linear = -1;
  double filter_quantile = 0.6;
  double filter_min = 0.3;
  double fit_epsilon = 1.0 / 256.0;
  // [normalform]
  double resonance_tol = 0.1;
  // [backbone]
  int samples = 100;
  int quad_n = 64;
  double r_quantile = 0.9;
  double r_max = 0.0;  // ≤ 0: from the data
  // [output]
  std::string output_dir = "foliate-out";
};

PipelineConfig parse_config(std::istream& is);
PipelineConfig load_config(const std::string& path);
/// Apply "section.key=value" overrides.
void apply_override(PipelineConfig& c, const std::string& assignment);
/// Canonical INI text of the whole configuration.
std::string config_text(const PipelineConfig& c);
/// Static checks that need no computation.
void validate_config(const PipelineConfig& c);

ForcedSystem config_system(const PipelineConfig& c);

enum class Stage { Data, Linear, Bundles, Fit, Manifold, NormalForm, Backbone };
const std::vector<Stage>& all_stages();
std::string stage_name(Stage s);

struct StageStatus {
  Stage stage;
  bool cached = false;
};

/// Runs every stage up to and including `last`, reusing artifacts whose
/// inputs hash to the recorded value.
std::vector<StageStatus> run_pipeline(const PipelineConfig& c, Stage last = Stage::Backbone,
                                      const std::function<void(const std::string&)>& log = {});

/// Spectrum table: map and vector-field eigenvalues, frequency and damping.
std::string mode_report(const BundleDecomposition& dec, double dt);

/// Summary of the E_rel quantiles by amplitude bin.
std::string error_report(const ErrorSummary& s);

/// Radius of the normal-form coordinate of every data point.
Eigen::VectorXd leaf_radii(const FoliationModel& m, const NormalFormModel& nf,
                           const TransformedDataset& d);

/// Hex SHA-256 of a byte string / file content.
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

/// Output file names inside the output directory.
namespace artifact {
inline constexpr const char* dataset = "dataset.csv";
inline constexpr const char* affine = "affine.txt";
inline constexpr const char* torus = "torus.txt";
inline constexpr const char* frame = "frame.txt";
inline constexpr const char* spectrum = "spectrum.txt";
inline constexpr const char* foliation = "foliation.txt";
inline constexpr const char* erel = "erel.csv";
inline constexpr const char* decoder = "decoder.txt";
inline constexpr const char* normal_form = "normal_form.txt";
inline constexpr const char* backbone = "backbone.csv";
}  // namespace artifact

}  // namespace foliate
