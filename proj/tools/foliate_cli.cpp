// Command line front end for the identification pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "foliate/error.hpp"
#include "foliate/pipeline.hpp"

using namespace foliate;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  int ell = -1, sigma = -1, sweeps = -1;
  double tol = -1.0;
  std::string modes, style;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.sets, "override, e.g. foliation.sigma=7")->take_all();
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("--ell", c.ell, "Fourier collocation order");
  app->add_option("--order", c.sigma, "polynomial order of the foliations");
  app->add_option("--sweeps", c.sweeps, "maximum optimisation sweeps");
  app->add_option("--tol", c.tol, "relative loss tolerance");
  app->add_option("--modes", c.modes, "selected spectral clusters, 1-based, e.g. 1,2");
  app->add_option("--style", c.style, "nonlinear constraint style: anchored or graph");
  app->add_flag("-q,--quiet", c.quiet, "only print errors");
}

PipelineConfig build_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.ell >= 0) cfg.ell = c.ell;
  if (c.sigma >= 0) cfg.sigma = c.sigma;
  if (c.sweeps >= 0) cfg.sweeps = c.sweeps;
  if (c.tol > 0) cfg.tol = c.tol;
  if (!c.modes.empty()) apply_override(cfg, "bundles.modes=" + c.modes);
  if (!c.style.empty()) cfg.style = c.style;
  for (const auto& s : c.sets) apply_override(cfg, s);
  validate_config(cfg);
  return cfg;
}

void run_to(const Common& c, Stage last) {
  const PipelineConfig cfg = build_config(c);
  auto log = [&](const std::string& m) {
    if (!c.quiet) std::cout << m << '\n';
  };
  run_pipeline(cfg, last, log);
}

void print_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ValidationError("missing artifact " + p.string() + "; run the pipeline first");
  std::cout << is.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant foliation reduced order models from trajectory data"};
  app.require_subcommand(1);

  Common c;
  auto* gen = app.add_subcommand("generate", "simulate a trajectory dataset");
  auto* idf = app.add_subcommand("identify", "linear model, invariant torus and vector bundles");
  auto* fit = app.add_subcommand("fit", "fit the invariant foliations");
  auto* ana = app.add_subcommand("analyze", "invariant manifold, normal form and backbone curves");
  auto* run = app.add_subcommand("run", "all stages");
  auto* rep = app.add_subcommand("report", "print the spectrum, error and backbone tables");
  auto* cfg = app.add_subcommand("config", "print the effective configuration");
  for (auto* s : {gen, idf, fit, ana, run, rep, cfg}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) run_to(c, Stage::Data);
    else if (idf->parsed()) run_to(c, Stage::Bundles);
    else if (fit->parsed()) run_to(c, Stage::Fit);
    else if (ana->parsed() || run->parsed()) run_to(c, Stage::Backbone);
    else if (cfg->parsed()) std::cout << config_text(build_config(c));
    else if (rep->parsed()) {
      const std::filesystem::path dir = build_config(c).output_dir;
      std::cout << "== spectrum\n";
      print_file(dir / artifact::spectrum);
      for (const char* f : {artifact::erel, artifact::backbone}) {
        if (!std::filesystem::exists(dir / f)) continue;
        std::cout << "\n== " << f << '\n';
        print_file(dir / f);
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
