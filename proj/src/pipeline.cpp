#include "foliate/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "foliate/error.hpp"

namespace foliate {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  std::string rest;
  if (is.fail() || (is >> rest)) throw ValidationError("config: bad value '" + text + "' for " + key);
  return v;
}

std::vector<int> parse_modes(const std::string& text) {
  std::vector<int> out;
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(parse_value<int>("bundles.modes", tok));
  return out;
}

void set_key(PipelineConfig& c, const std::string& section, const std::string& key,
             const std::string& value) {
  const std::string full = section + "." + key;
  auto d = [&] { return parse_value<double>(full, value); };
  auto i = [&] { return parse_value<int>(full, value); };
  if (section == "data") {
    if (key == "system") c.system = value;
    else if (key == "dataset") c.dataset = value;
    else if (key == "omega0") c.omega0 = d();
    else if (key == "dt") c.dt = d();
    else if (key == "n_traj") c.n_traj = i();
    else if (key == "n_points") c.n_points = i();
    else if (key == "radius") c.radius = d();
    else if (key == "noise") c.noise = d();
    else if (key == "seed") c.seed = parse_value<std::uint64_t>(full, value);
    else if (key == "substeps") c.substeps = i();
    else if (key.rfind("param.", 0) == 0) c.params[key.substr(6)] = d();
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "linear") {
    if (key == "ell") c.ell = i();
    else if (key == "epsilon") c.epsilon = d();
    else if (key == "trim") c.trim = d();
    else if (key == "min_keep") c.min_keep = d();
    else if (key == "max_iter") c.max_iter = i();
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "bundles") {
    if (key == "modes") c.modes = parse_modes(value);
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "foliation") {
    if (key == "sigma") c.sigma = i();
    else if (key == "sweeps") c.sweeps = i();
    else if (key == "tol") c.tol = d();
    else if (key == "block_iterations") c.block_iterations = i();
    else if (key == "style") c.style = value;
    else if (key == "s_linear") c.s_linear = i();
    else if (key == "filter_quantile") c.filter_quantile = d();
    else if (key == "filter_min") c.filter_min = d();
    else if (key == "epsilon") c.fit_epsilon = d();
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "normalform") {
    if (key == "resonance_tol") c.resonance_tol = d();
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "backbone") {
    if (key == "samples") c.samples = i();
    else if (key == "quad_n") c.quad_n = i();
    else if (key == "r_quantile") c.r_quantile = d();
    else if (key == "r_max") c.r_max = d();
    else throw ValidationError("config: unknown key " + full);
  } else if (section == "output") {
    if (key == "dir") c.output_dir = value;
    else throw ValidationError("config: unknown key " + full);
  } else {
    throw ValidationError("config: unknown section [" + section + "]");
  }
}

// shortest text that reads back to the same double
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

PipelineConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  PipelineConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ValidationError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set_key(c, section, key, value.data());
  }
  validate_config(c);
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path + "'");
  return parse_config(is);
}

void apply_override(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ValidationError("override must look like section.key=value: '" + assignment + "'");
  set_key(c, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1),
          assignment.substr(eq + 1));
}

std::string config_text(const PipelineConfig& c) {
  std::ostringstream os;
  os << "[data]\nsystem=" << c.system << "\ndataset=" << c.dataset << "\nomega0=" << fmt(c.omega0)
     << "\ndt=" << fmt(c.dt) << "\nn_traj=" << c.n_traj << "\nn_points=" << c.n_points
     << "\nradius=" << fmt(c.radius) << "\nnoise=" << fmt(c.noise) << "\nseed=" << c.seed
     << "\nsubsteps=" << c.substeps << '\n';
  for (const auto& [k, v] : c.params) os << "param." << k << '=' << fmt(v) << '\n';
  os << "\n[linear]\nell=" << c.ell << "\nepsilon=" << fmt(c.epsilon) << "\ntrim=" << fmt(c.trim)
     << "\nmin_keep=" << fmt(c.min_keep) << "\nmax_iter=" << c.max_iter << '\n';
  os << "\n[bundles]\nmodes=";
  for (std::size_t i = 0; i < c.modes.size(); ++i) os << (i ? "," : "") << c.modes[i];
  os << "\n\n[foliation]\nsigma=" << c.sigma << "\nsweeps=" << c.sweeps << "\ntol=" << fmt(c.tol)
     << "\nblock_iterations=" << c.block_iterations << "\nstyle=" << c.style
     << "\ns_linear=" << c.s_linear << "\nfilter_quantile=" << fmt(c.filter_quantile)
     << "\nfilter_min=" << fmt(c.filter_min) << "\nepsilon=" << fmt(c.fit_epsilon) << '\n';
  os << "\n[normalform]\nresonance_tol=" << fmt(c.resonance_tol) << '\n';
  os << "\n[backbone]\nsamples=" << c.samples << "\nquad_n=" << c.quad_n
     << "\nr_quantile=" << fmt(c.r_quantile) << "\nr_max=" << fmt(c.r_max) << '\n';
  os << "\n[output]\ndir=" << c.output_dir << '\n';
  return os.str();
}

void validate_config(const PipelineConfig& c) {
  if (c.ell < 0) throw ValidationError("config: linear.ell must be nonnegative");
  if (c.sigma < 1) throw ValidationError("config: foliation.sigma must be at least 1");
  if (c.modes.empty()) throw ValidationError("config: bundles.modes is empty");
  std::set<int> seen;
  int n_max = 0;
  if (c.dataset.empty()) {
    if (c.system == "traffic") n_max = kTrafficDim;
    else if (c.system == "shawpierre" || c.system == "shaw_pierre" || c.system == "shaw-pierre")
      n_max = 4;
    else throw ValidationError("config: unknown system '" + c.system + "'");
  }
  for (int m : c.modes) {
    if (m < 1) throw ValidationError("config: mode indices are 1-based");
    // a system of dimension n has at most n spectral clusters
    if (n_max > 0 && m > n_max) {
      std::ostringstream msg;
      msg << "config: mode " << m << " does not exist; a " << n_max
          << "-dimensional system has at most " << n_max << " spectral clusters";
      throw ValidationError(msg.str());
    }
    if (!seen.insert(m).second) throw ValidationError("config: repeated mode index");
  }
  if (!(c.dt > 0.0)) throw ValidationError("config: data.dt must be positive");
  if (c.n_traj < 1 || c.n_points < 2) throw ValidationError("config: need trajectories with at least two points");
  if (!(c.epsilon > 0.0) || !(c.fit_epsilon > 0.0)) throw ValidationError("config: epsilon must be positive");
  if (!(c.trim >= 0.0 && c.trim < 1.0)) throw ValidationError("config: linear.trim must lie in [0, 1)");
  if (!(c.min_keep > 0.0 && c.min_keep <= 1.0)) throw ValidationError("config: linear.min_keep must lie in (0, 1]");
  if (c.sweeps < 1 || c.block_iterations < 1) throw ValidationError("config: sweep counts must be positive");
  constraint_style_from_string(c.style);
  if (!(c.resonance_tol > 0.0)) throw ValidationError("config: resonance_tol must be positive");
  if (c.samples < 2 || c.quad_n < 4) throw ValidationError("config: backbone sampling too coarse");
  if (!(c.r_quantile > 0.0 && c.r_quantile <= 1.0)) throw ValidationError("config: r_quantile must lie in (0, 1]");
}

ForcedSystem config_system(const PipelineConfig& c) {
  double omega0 = c.omega0;
  if (omega0 < 0.0) omega0 = c.system == "traffic" ? 0.4374 : 0.79;
  return make_system(c.system, c.params, omega0);
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s{Stage::Data,     Stage::Linear,     Stage::Bundles, Stage::Fit,
                                    Stage::Manifold, Stage::NormalForm, Stage::Backbone};
  return s;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Data: return "data";
    case Stage::Linear: return "linear";
    case Stage::Bundles: return "bundles";
    case Stage::Fit: return "fit";
    case Stage::Manifold: return "manifold";
    case Stage::NormalForm: return "normalform";
    case Stage::Backbone: return "backbone";
  }
  return "?";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string file_sha256(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return sha256_hex(ss.str());
}

std::string mode_report(const BundleDecomposition& dec, double dt) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "mode  size  |lambda| range          lambda_map                 lambda_field               "
        "frequency   damping   notes\n";
  for (std::size_t i = 0; i < dec.clusters.size(); ++i) {
    const auto& c = dec.clusters[i];
    const std::complex<double> lf = field_eigenvalue(c.lambda, dt);
    std::string notes;
    if (std::abs(c.lambda.imag()) < 1e-12 && c.lambda.real() < 0.0)
      notes += "complex logarithm branch ambiguity; ";
    if (std::abs(c.lambda) >= 1.0) notes += "unstable bundle; ";
    const double freq = std::abs(lf.imag());
    const double damp = -lf.real() / std::abs(lf);
    os << std::setw(4) << i + 1 << std::setw(6) << c.members.size() << "  [" << c.lo << ", " << c.hi
       << "]  " << std::setw(10) << c.lambda.real() << (c.lambda.imag() < 0 ? " - " : " + ")
       << std::abs(c.lambda.imag()) << "i  " << std::setw(10) << lf.real()
       << (lf.imag() < 0 ? " - " : " + ") << std::abs(lf.imag()) << "i  " << std::setw(10) << freq
       << "  " << std::setw(8) << damp << "  " << notes << '\n';
  }
  return os.str();
}

std::string error_report(const ErrorSummary& s) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "amp_lo,amp_hi,count,median,p90\n";
  for (std::size_t b = 0; b < s.bin_count.size(); ++b)
    os << s.bin_edges[b] << ',' << s.bin_edges[b + 1] << ',' << s.bin_count[b] << ','
       << s.bin_median[b] << ',' << s.bin_p90[b] << '\n';
  return os.str();
}

Eigen::VectorXd leaf_radii(const FoliationModel& m, const NormalFormModel& nf,
                           const TransformedDataset& d) {
  using cd = std::complex<double>;
  const int dz = m.dim_z, M = m.grid.size();
  Eigen::VectorXd out(d.size());
  Eigen::VectorXcd phi(nf.T.nmon());
  for (int k = 0; k < d.size(); ++k) {
    const Eigen::VectorXd z = eval_U(m, d.x(k), d.t.col(k));
    Eigen::MatrixXcd Ud = Eigen::MatrixXcd::Zero(dz, dz), Tc = Eigen::MatrixXcd::Zero(dz, nf.T.nmon());
    for (int j = 0; j < M; ++j) {
      Ud += d.t(j, k) * nf.diag.Ud[j];
      Tc += d.t(j, k) * nf.T.coeffs[j];
    }
    const Eigen::VectorXcd target = Ud * z.cast<cd>();
    Eigen::VectorXcd w = target;
    for (int it = 0; it < 50; ++it) {
      nf.T.basis->evaluate(w, phi);
      const Eigen::VectorXcd r = Tc * phi - target;
      if (r.norm() <= 1e-13 * std::max(1.0, target.norm())) break;
      const Eigen::MatrixXcd J = Tc * nf.T.basis->gradient<cd>(phi);
      w -= J.partialPivLu().solve(r);
      if (!w.allFinite()) break;
    }
    out(k) = w.allFinite() ? std::abs(w(0)) : std::numeric_limits<double>::infinity();
  }
  return out;
}

namespace {

struct Context {
  const PipelineConfig& cfg;
  fs::path dir;
  std::function<void(const std::string&)> log;

  std::string path(const char* name) const { return (dir / name).string(); }
  void say(const std::string& s) const {
    if (log) log(s);
  }
};

template <class F>
void write_file(const std::string& path, F&& body) {
  // write to a temporary then rename so a crash never leaves a partial artifact
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw Error("cannot write '" + path + "'");
    body(os);
    if (!os) throw Error("failed writing '" + path + "'");
  }
  fs::rename(tmp, path);
}

template <class T, class F>
T read_file(const std::string& path, F&& reader) {
  std::ifstream is(path);
  if (!is) throw Error("missing artifact '" + path + "'");
  return reader(is);
}

std::string stamp_path(const Context& ctx, Stage s) {
  return (ctx.dir / (".stamp-" + stage_name(s))).string();
}

// A stage is current when its stamp records the same input key and all
// outputs still hash to the recorded values.
bool stage_current(const Context& ctx, Stage s, const std::string& key,
                   const std::vector<const char*>& outputs) {
  std::ifstream is(stamp_path(ctx, s));
  if (!is) return false;
  std::string line;
  if (!std::getline(is, line) || line != key) return false;
  std::map<std::string, std::string> recorded;
  std::string name, hash;
  while (is >> name >> hash) recorded[name] = hash;
  for (const char* o : outputs) {
    const auto it = recorded.find(o);
    if (it == recorded.end() || !fs::exists(ctx.path(o)) || file_sha256(ctx.path(o)) != it->second)
      return false;
  }
  return true;
}

void write_stamp(const Context& ctx, Stage s, const std::string& key,
                 const std::vector<const char*>& outputs) {
  write_file(stamp_path(ctx, s), [&](std::ostream& os) {
    os << key << '\n';
    for (const char* o : outputs) os << o << ' ' << file_sha256(ctx.path(o)) << '\n';
  });
}

std::string input_key(const Context& ctx, const std::string& params,
                      const std::vector<const char*>& inputs) {
  std::string all = params;
  for (const char* in : inputs) all += std::string("\n") + in + ":" + file_sha256(ctx.path(in));
  return sha256_hex(all);
}

FitOptions fit_options(const PipelineConfig& c) {
  FitOptions o;
  o.sigma = c.sigma;
  o.max_sweeps = c.sweeps;
  o.tol = c.tol;
  o.block_iterations = c.block_iterations;
  o.epsilon = c.fit_epsilon;
  o.s_linear = c.s_linear;
  o.style = constraint_style_from_string(c.style);
  o.filter_quantile = c.filter_quantile;
  o.filter_min = c.filter_min;
  return o;
}

}  // namespace

std::vector<StageStatus> run_pipeline(const PipelineConfig& c, Stage last,
                                      const std::function<void(const std::string&)>& log) {
  validate_config(c);
  Context ctx{c, fs::path(c.output_dir), log};
  fs::create_directories(ctx.dir);
  std::vector<StageStatus> status;
  const PipelineConfig& g = c;

  for (Stage s : all_stages()) {
    if (static_cast<int>(s) > static_cast<int>(last)) break;
    const std::string name = stage_name(s);
    std::ostringstream params;
    params << std::setprecision(17) << name << '\n';
    std::vector<const char*> inputs, outputs;
    switch (s) {
      case Stage::Data:
        if (!g.dataset.empty()) {
          params << "file " << file_sha256(g.dataset);
        } else {
          params << g.system << ' ' << g.omega0 << ' ' << g.dt << ' ' << g.n_traj << ' ' << g.n_points
                 << ' ' << g.radius << ' ' << g.noise << ' ' << g.seed << ' ' << g.substeps;
          for (const auto& [k, v] : g.params) params << ' ' << k << '=' << v;
        }
        outputs = {artifact::dataset};
        break;
      case Stage::Linear:
        params << g.ell << ' ' << g.epsilon << ' ' << g.trim << ' ' << g.min_keep << ' ' << g.max_iter;
        inputs = {artifact::dataset};
        outputs = {artifact::affine, artifact::torus};
        break;
      case Stage::Bundles:
        for (int m : g.modes) params << m << ' ';
        inputs = {artifact::dataset, artifact::affine};
        outputs = {artifact::frame, artifact::spectrum};
        break;
      case Stage::Fit:
        params << config_text(g).substr(config_text(g).find("[foliation]"),
                                        config_text(g).find("[normalform]") -
                                            config_text(g).find("[foliation]"));
        inputs = {artifact::dataset, artifact::torus, artifact::frame};
        outputs = {artifact::foliation, artifact::erel};
        break;
      case Stage::Manifold:
        inputs = {artifact::foliation};
        outputs = {artifact::decoder};
        break;
      case Stage::NormalForm:
        params << g.resonance_tol;
        inputs = {artifact::foliation};
        outputs = {artifact::normal_form};
        break;
      case Stage::Backbone:
        params << g.resonance_tol << ' ' << g.samples << ' ' << g.quad_n << ' ' << g.r_quantile << ' '
               << g.r_max;
        inputs = {artifact::dataset, artifact::torus, artifact::frame, artifact::foliation,
                  artifact::decoder};
        outputs = {artifact::backbone};
        break;
    }
    const std::string key = input_key(ctx, params.str(), inputs);
    if (stage_current(ctx, s, key, outputs)) {
      ctx.say("[" + name + "] cache hit");
      status.push_back({s, true});
      continue;
    }
    ctx.say("[" + name + "] running");
    try {
      switch (s) {
        case Stage::Data: {
          TrajectoryDataset data;
          if (!g.dataset.empty()) {
            data = load_dataset(g.dataset);
          } else {
            DatasetOptions o;
            o.n_traj = g.n_traj;
            o.n_points = g.n_points;
            o.dt = g.dt;
            o.radius = g.radius;
            o.noise_sigma = g.noise;
            o.seed = g.seed;
            o.substeps = g.substeps;
            data = generate_dataset(config_system(g), o);
          }
          write_file(ctx.path(artifact::dataset), [&](std::ostream& os) { write_dataset(os, data); });
          ctx.say("  " + std::to_string(data.size()) + " triplets");
          break;
        }
        case Stage::Linear: {
          const auto data = load_dataset(ctx.path(artifact::dataset));
          LinearIdOptions o;
          o.epsilon = g.epsilon;
          o.trim_fraction = g.trim;
          o.min_keep = g.min_keep;
          o.max_iter = g.max_iter;
          const auto res = iterate_linear_id(data, CollocationGrid(g.ell), o);
          write_file(ctx.path(artifact::affine), [&](std::ostream& os) { write_affine_model(os, res.model); });
          write_file(ctx.path(artifact::torus), [&](std::ostream& os) { write_torus_function(os, res.K); });
          std::ostringstream msg;
          msg << "  " << res.iterations << " iterations, " << res.active << " points active, torus residual "
              << torus_residual(res.model, res.K, data.omega);
          ctx.say(msg.str());
          break;
        }
        case Stage::Bundles: {
          const auto data = load_dataset(ctx.path(artifact::dataset));
          const auto model = read_file<AffineModel>(ctx.path(artifact::affine), read_affine_model);
          const auto dec = decompose_bundles(model.grid, model.A, data.omega);
          std::vector<int> sel;
          for (int m : g.modes) sel.push_back(m - 1);
          const std::string report = mode_report(dec, data.dt);
          write_file(ctx.path(artifact::spectrum), [&](std::ostream& os) { os << report; });
          const auto frame = make_frame(dec, sel, data.omega);
          write_file(ctx.path(artifact::frame), [&](std::ostream& os) { write_frame(os, frame); });
          ctx.say(report);
          break;
        }
        case Stage::Fit: {
          const auto data = load_dataset(ctx.path(artifact::dataset));
          const auto K = read_file<TorusFunction>(ctx.path(artifact::torus), read_torus_function);
          const auto frame = read_file<BundleFrame>(ctx.path(artifact::frame), read_frame);
          const auto td = transform_dataset(data, frame, K);
          FitOptions o = fit_options(g);
          o.log = [&](const std::string& m) { ctx.say("  " + m); };
          FitReport rep;
          const auto model = fit_foliations(td, frame, o, &rep);
          write_file(ctx.path(artifact::foliation), [&](std::ostream& os) { write_foliation(os, model); });
          const auto err = relative_error(model, td);
          write_file(ctx.path(artifact::erel), [&](std::ostream& os) { os << error_report(err); });
          std::ostringstream msg;
          msg << "  " << rep.sweeps << " sweeps" << (rep.converged ? " (converged)" : "")
              << ", median E_rel " << err.median_below(std::numeric_limits<double>::infinity());
          ctx.say(msg.str());
          break;
        }
        case Stage::Manifold: {
          const auto m = read_file<FoliationModel>(ctx.path(artifact::foliation), read_foliation);
          const auto d = recover_manifold(m);
          write_file(ctx.path(artifact::decoder), [&](std::ostream& os) { write_decoder(os, d); });
          break;
        }
        case Stage::NormalForm: {
          const auto m = read_file<FoliationModel>(ctx.path(artifact::foliation), read_foliation);
          const auto nf = solve_homological(diagonalize_linear(m.R, m.omega), g.resonance_tol);
          write_file(ctx.path(artifact::normal_form), [&](std::ostream& os) { write_normal_form(os, nf); });
          std::ostringstream msg;
          msg << "  conjugacy residual " << conjugacy_residual(nf);
          ctx.say(msg.str());
          break;
        }
        case Stage::Backbone: {
          const auto data = load_dataset(ctx.path(artifact::dataset));
          const auto K = read_file<TorusFunction>(ctx.path(artifact::torus), read_torus_function);
          const auto frame = read_file<BundleFrame>(ctx.path(artifact::frame), read_frame);
          const auto m = read_file<FoliationModel>(ctx.path(artifact::foliation), read_foliation);
          const auto dec = read_file<DecoderPoly>(ctx.path(artifact::decoder), [&](std::istream& is) {
            return read_decoder(is, m.grid);
          });
          if (m.dim_z != 2)
            throw ValidationError("backbone: requires a single two-dimensional mode (got dim Z = " +
                                  std::to_string(m.dim_z) + ")");
          const auto nf = solve_homological(diagonalize_linear(m.R, m.omega), g.resonance_tol);
          const auto polar = polar_from_normal_form(nf);
          const ComplexPoly Wb = compose_decoder(dec.W, nf.diag.Ud, nf.T);
          const double defect = reality_defect(Wb, nf.diag.partner);
          if (defect > 1e-9 * std::max(1.0, Wb.max_abs()))
            throw NumericalError("composite decoder is not real on conjugate coordinates");
          const DecoderFamily fam(Wb, &frame, g.quad_n);
          BackboneOptions o;
          o.samples = g.samples;
          o.quad_n = g.quad_n;
          o.r_max = g.r_max;
          if (o.r_max <= 0.0) {
            const auto td = transform_dataset(data, frame, K);
            Eigen::VectorXd s = leaf_radii(m, nf, td);
            std::vector<double> v(s.data(), s.data() + s.size());
            v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
            if (v.empty()) throw NumericalError("backbone: no data point could be mapped to the normal form");
            std::sort(v.begin(), v.end());
            double sq = v[std::min(v.size() - 1, static_cast<std::size_t>(g.r_quantile * (v.size() - 1)))];
            const double lim = monotone_limit(fam, sq, 200, g.quad_n);
            if (lim < sq) ctx.say("  amplitude range capped where kappa stops increasing");
            sq = std::min(sq, lim);
            o.r_max = kappa(fam, sq, g.quad_n);
          }
          const auto bb = compute_backbone(polar, fam, data.dt, o);
          write_file(ctx.path(artifact::backbone), [&](std::ostream& os) { write_backbone(os, bb); });
          std::ostringstream msg;
          msg << "  omega(0) = " << bb.omega.front() << ", zeta(0) = " << bb.zeta.front()
              << ", r_max = " << bb.r.back() << ", omega(r_max) = " << bb.omega.back()
              << ", zeta(r_max) = " << bb.zeta.back();
          ctx.say(msg.str());
          break;
        }
      }
    } catch (const Error& e) {
      // keep the error category, prefix the stage
      const std::string what = "stage " + name + ": " + e.what();
      if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(what);
      if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(what);
      throw Error(what);
    }
    write_stamp(ctx, s, key, outputs);
    status.push_back({s, false});
  }
  return status;
}

}  // namespace foliate
