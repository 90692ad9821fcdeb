#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "foliate/error.hpp"
#include "foliate/fourier.hpp"
#include "foliate/systems.hpp"

namespace foliate {

namespace {

Eigen::VectorXd sample_ball(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::VectorXd d(n);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (int i = 0; i < n; ++i) d(i) = normal(rng);
    norm = d.norm();
  }
  return d * (radius * std::pow(uniform(rng), 1.0 / n) / norm);
}

}  // namespace

TrajectoryDataset generate_dataset(const ForcedSystem& sys, const DatasetOptions& opt) {
  if (opt.n_traj < 1 || opt.n_points < 1)
    throw ValidationError("generate_dataset: n_traj and n_points must be at least 1");
  if (opt.dt <= 0.0) throw ValidationError("generate_dataset: dt must be positive");
  if (opt.radius < 0.0 || opt.noise_sigma < 0.0)
    throw ValidationError("generate_dataset: radius and noise must be nonnegative");
  const int n = sys.dim;
  if (opt.centre.size() != 0 && opt.centre.size() != n)
    throw ValidationError("generate_dataset: centre has the wrong dimension");
  const Eigen::VectorXd centre =
      opt.centre.size() == 0 ? Eigen::VectorXd::Zero(n) : opt.centre;

  const int pairs = opt.n_points - 1;
  TrajectoryDataset d;
  d.dim = n;
  d.dt = opt.dt;
  d.omega = normalize_angle(sys.omega0 * opt.dt);
  d.seed = opt.seed;
  d.x.resize(n, static_cast<Eigen::Index>(opt.n_traj) * pairs);
  d.y.resize(n, d.x.cols());
  d.theta.resize(d.x.cols());
  d.trajectory.resize(d.x.cols());

  for (int t = 0; t < opt.n_traj; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    const Eigen::VectorXd x0 = centre + sample_ball(rng, n, opt.radius);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double theta0 = phase(rng);
    auto states = integrate(sys, x0, theta0, opt.dt, pairs, opt.substeps);
    if (opt.noise_sigma > 0.0) {
      std::normal_distribution<double> normal(0.0, opt.noise_sigma);
      for (auto& s : states)
        for (int i = 0; i < n; ++i) s(i) += normal(rng);
    }
    for (int k = 0; k < pairs; ++k) {
      const Eigen::Index col = static_cast<Eigen::Index>(t) * pairs + k;
      d.x.col(col) = states[k];
      d.y.col(col) = states[k + 1];
      d.theta(col) = normalize_angle(theta0 + k * d.omega);
      d.trajectory[col] = t;
    }
  }
  return d;
}

void write_dataset(std::ostream& os, const TrajectoryDataset& data) {
  char buf[64];
  os << "# n=" << data.dim << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", data.dt);
  os << "# dt=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", data.omega);
  os << "# omega=" << buf << '\n';
  os << "# seed=" << data.seed << '\n';
  for (int i = 0; i < data.dim; ++i) os << 'x' << i + 1 << ',';
  for (int i = 0; i < data.dim; ++i) os << 'y' << i + 1 << ',';
  os << "theta,trajectory\n";
  for (int k = 0; k < data.size(); ++k) {
    for (int i = 0; i < data.dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", data.x(i, k));
      os << buf;
    }
    for (int i = 0; i < data.dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", data.y(i, k));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,", data.theta(k));
    os << buf << data.trajectory[k] << '\n';
  }
}

namespace {

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("dataset: cannot parse " + what + " '" + s + "'");
  }
}

}  // namespace

TrajectoryDataset read_dataset(std::istream& is) {
  TrajectoryDataset d;
  d.dim = -1;
  bool have_dt = false, have_omega = false;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<int> traj;
  bool seen_columns = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      const std::string val = line.substr(eq + 1);
      if (key == "n") {
        d.dim = static_cast<int>(parse_double(val, "n"));
      } else if (key == "dt") {
        d.dt = parse_double(val, "dt");
        have_dt = true;
      } else if (key == "omega") {
        d.omega = normalize_angle(parse_double(val, "omega"));
        have_omega = true;
      } else if (key == "seed") {
        d.seed = static_cast<std::uint64_t>(std::stoull(val));
      }
      continue;
    }
    if (!seen_columns) {
      seen_columns = true;
      if (line[0] == 'x') continue;  // column names
    }
    if (d.dim < 1) throw ValidationError("dataset: header is missing 'n'");
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell, "value"));
    if (static_cast<int>(row.size()) != 2 * d.dim + 2) {
      std::ostringstream msg;
      msg << "dataset: line " << lineno << " has " << row.size() << " columns, expected "
          << 2 * d.dim + 2;
      throw ValidationError(msg.str());
    }
    traj.push_back(static_cast<int>(row.back()));
    rows.push_back(std::move(row));
  }
  if (d.dim < 1 || !have_dt || !have_omega)
    throw ValidationError("dataset: header must record n, dt and omega");
  if (rows.empty()) throw ValidationError("dataset: no data rows");
  const int N = static_cast<int>(rows.size());
  d.x.resize(d.dim, N);
  d.y.resize(d.dim, N);
  d.theta.resize(N);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < d.dim; ++i) {
      d.x(i, k) = rows[k][i];
      d.y(i, k) = rows[k][d.dim + i];
    }
    d.theta(k) = normalize_angle(rows[k][2 * d.dim]);
  }
  d.trajectory = std::move(traj);
  if (!d.x.allFinite() || !d.y.allFinite() || !d.theta.allFinite())
    throw ValidationError("dataset: non-finite values");
  return d;
}

void save_dataset(const std::string& path, const TrajectoryDataset& data) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_dataset(os, data);
  if (!os) throw Error("failed writing '" + path + "'");
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open dataset '" + path + "'");
  return read_dataset(is);
}

TrajectoryDataset subset(const TrajectoryDataset& data, const std::vector<int>& indices) {
  TrajectoryDataset d;
  d.dim = data.dim;
  d.dt = data.dt;
  d.omega = data.omega;
  d.seed = data.seed;
  const int N = static_cast<int>(indices.size());
  d.x.resize(data.dim, N);
  d.y.resize(data.dim, N);
  d.theta.resize(N);
  d.trajectory.resize(N);
  for (int k = 0; k < N; ++k) {
    const int s = indices[k];
    if (s < 0 || s >= data.size()) throw ValidationError("subset: index out of range");
    d.x.col(k) = data.x.col(s);
    d.y.col(k) = data.y.col(s);
    d.theta(k) = data.theta(s);
    d.trajectory[k] = data.trajectory.empty() ? 0 : data.trajectory[s];
  }
  return d;
}

}  // namespace foliate
