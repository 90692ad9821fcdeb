#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "foliate/error.hpp"
#include "foliate/pipeline.hpp"

using namespace foliate;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const std::string& dir) {
  PipelineConfig c;
  c.n_traj = 60;
  c.n_points = 30;
  c.sigma = 3;
  c.sweeps = 2;
  c.samples = 10;
  c.quad_n = 16;
  c.output_dir = (fs::temp_directory_path() / dir).string();
  fs::remove_all(c.output_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream is(
      "[data]\nsystem=traffic\nparam.A=0.2\nseed=7\n[linear]\nell=7\n[bundles]\nmodes=1, 2\n"
      "[foliation]\nsigma=7\nstyle=graph\n[output]\ndir=somewhere\n");
  const PipelineConfig c = parse_config(is);
  CHECK(c.system == "traffic");
  CHECK(c.params.at("A") == 0.2);
  CHECK(c.seed == 7);
  CHECK(c.ell == 7);
  CHECK(c.modes == std::vector<int>{1, 2});
  CHECK(c.sigma == 7);
  CHECK(c.style == "graph");
  CHECK(c.output_dir == "somewhere");

  std::istringstream back(config_text(c));
  const PipelineConfig d = parse_config(back);
  CHECK(config_text(d) == config_text(c));
}

TEST_CASE("config validation") {
  std::istringstream unknown("[foliation]\nsigmaa=3\n");
  CHECK_THROWS_AS(parse_config(unknown), ValidationError);
  std::istringstream section("[extra]\na=1\n");
  CHECK_THROWS_AS(parse_config(section), ValidationError);
  std::istringstream bad("[linear]\nell=two\n");
  CHECK_THROWS_AS(parse_config(bad), ValidationError);

  PipelineConfig c;
  apply_override(c, "foliation.sigma=4");
  CHECK(c.sigma == 4);
  CHECK_THROWS_AS(apply_override(c, "sigma=4"), ValidationError);
  c.modes = {5};
  CHECK_THROWS_AS(validate_config(c), ValidationError);
  c.modes = {};
  CHECK_THROWS_AS(validate_config(c), ValidationError);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mode report") {
  BundleDecomposition dec;
  auto add = [&](std::complex<double> l) {
    SpectrumCluster c;
    c.lambda = l;
    c.members = {0};
    c.lo = c.hi = std::abs(l);
    dec.clusters.push_back(c);
  };
  add(std::exp(std::complex<double>(-0.0163, 0.4971) * 0.8));
  add(-0.5);
  add(1.2);
  const std::string r = mode_report(dec, 0.8);
  CHECK(r.find("-0.016300 + 0.497100i") != std::string::npos);
  CHECK(r.find("complex logarithm branch ambiguity") != std::string::npos);
  CHECK(r.find("unstable bundle") != std::string::npos);
}

TEST_CASE("nonexistent mode fails before any computation") {
  PipelineConfig c = small_config("foliate-test-badmode");
  c.modes = {9};
  CHECK_THROWS_AS(run_pipeline(c), ValidationError);
  CHECK_FALSE(fs::exists(fs::path(c.output_dir) / artifact::dataset));
}

TEST_CASE("caching, determinism and stage isolation") {
  PipelineConfig c = small_config("foliate-test-cache");
  const auto first = run_pipeline(c);
  REQUIRE(first.size() == all_stages().size());
  for (const auto& s : first) CHECK_FALSE(s.cached);
  const fs::path dir = c.output_dir;
  std::map<std::string, std::string> hashes;
  for (const auto& e : fs::directory_iterator(dir)) hashes[e.path().filename()] = slurp(e.path());

  const auto second = run_pipeline(c);
  for (const auto& s : second) CHECK(s.cached);
  for (const auto& [name, content] : hashes) CHECK(slurp(dir / name) == content);

  fs::remove(dir / artifact::backbone);
  const auto third = run_pipeline(c);
  for (const auto& s : third) CHECK(s.cached == (s.stage != Stage::Backbone));
  CHECK(slurp(dir / artifact::backbone) == hashes[artifact::backbone]);

  // an identical configuration elsewhere produces identical artifacts
  PipelineConfig other = small_config("foliate-test-cache2");
  run_pipeline(other);
  for (const char* a : {artifact::dataset, artifact::foliation, artifact::backbone})
    CHECK(file_sha256((fs::path(other.output_dir) / a).string()) == file_sha256((dir / a).string()));

  // a changed fit setting reruns the fit and everything after it
  c.sigma = 2;
  const auto fourth = run_pipeline(c);
  for (const auto& s : fourth)
    CHECK(s.cached == (s.stage == Stage::Data || s.stage == Stage::Linear || s.stage == Stage::Bundles));
}
