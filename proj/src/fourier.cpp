#include "foliate/fourier.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "foliate/error.hpp"

namespace foliate {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double normalize_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a value just below a negative multiple of 2π rounds to 2π
  if (r >= kTwoPi) r = 0.0;
  return r;
}

CollocationGrid::CollocationGrid(int ell) : ell_(ell) {
  if (ell < 0) throw ValidationError("collocation grid: ell must be nonnegative");
}

double CollocationGrid::node(int j) const { return kTwoPi * j / size(); }

Eigen::VectorXd CollocationGrid::nodes() const {
  Eigen::VectorXd v(size());
  for (int j = 0; j < size(); ++j) v(j) = node(j);
  return v;
}

double gamma(double theta, int ell) {
  const double t = normalize_angle(theta);
  const double m = 2.0 * ell + 1.0;
  const double s = std::sin(0.5 * t);
  // removable singularity at θ ≡ 0; the kernel is 2π-periodic for odd m
  if (std::abs(s) < 1e-9) return 1.0;
  return std::sin(0.5 * m * t) / (m * s);
}

Eigen::VectorXd interpolation_weights(const CollocationGrid& grid, double theta) {
  Eigen::VectorXd t(grid.size());
  for (int j = 0; j < grid.size(); ++j) t(j) = gamma(theta - grid.node(j), grid.ell());
  return t;
}

TorusFunction::TorusFunction(CollocationGrid g, Eigen::MatrixXd v)
    : grid(g), values(std::move(v)) {
  if (values.cols() != grid.size())
    throw ValidationError("torus function: column count does not match grid size");
}

Eigen::VectorXd TorusFunction::operator()(double theta) const {
  return values * interpolation_weights(grid, theta);
}

Eigen::VectorXd interpolate(const TorusFunction& f, double theta) { return f(theta); }

ShiftMatrix shift_matrix(const CollocationGrid& grid, double omega) {
  const int m = grid.size();
  ShiftMatrix s{grid, normalize_angle(omega), Eigen::MatrixXd(m, m)};
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      s.entries(j, k) = gamma(grid.node(k) - grid.node(j) - omega, grid.ell());
  return s;
}

Eigen::MatrixXcd fourier_coefficients(const CollocationGrid& grid,
                                      const Eigen::MatrixXcd& values) {
  const int m = grid.size();
  Eigen::MatrixXcd dft(m, m);
  for (int j = 0; j < m; ++j)
    for (int l = -grid.ell(); l <= grid.ell(); ++l)
      dft(j, l + grid.ell()) = std::polar(1.0, -l * grid.node(j));
  return values * dft;
}

Eigen::MatrixXcd fourier_coefficients(const TorusFunction& f) {
  return fourier_coefficients(f.grid, f.values.cast<std::complex<double>>());
}

Eigen::MatrixXcd fourier_synthesis(const CollocationGrid& grid,
                                   const Eigen::MatrixXcd& coefficients) {
  const int m = grid.size();
  Eigen::MatrixXcd idft(m, m);
  for (int l = -grid.ell(); l <= grid.ell(); ++l)
    for (int j = 0; j < m; ++j)
      idft(l + grid.ell(), j) = std::polar(1.0 / m, l * grid.node(j));
  return coefficients * idft;
}

void write_torus_function(std::ostream& os, const TorusFunction& f) {
  os << "ell=" << f.grid.ell() << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < f.values.rows(); ++i) {
    for (int j = 0; j < f.values.cols(); ++j) {
      if (j) os << ' ';
      os << f.values(i, j);
    }
    os << '\n';
  }
}

TorusFunction read_torus_function(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("ell=", 0) != 0)
    throw ValidationError("torus function: missing 'ell=' header");
  int ell = 0;
  try {
    ell = std::stoi(header.substr(4));
  } catch (const std::exception&) {
    throw ValidationError("torus function: malformed header '" + header + "'");
  }
  CollocationGrid grid(ell);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof())
      throw ValidationError("torus function: non-numeric entry in row " +
                            std::to_string(rows.size() + 1));
    if (static_cast<int>(row.size()) != grid.size())
      throw ValidationError("torus function: row " + std::to_string(rows.size() + 1) +
                            " has " + std::to_string(row.size()) + " columns, expected " +
                            std::to_string(grid.size()));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), grid.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) values(static_cast<Eigen::Index>(i), j) = rows[i][j];
  return TorusFunction(grid, std::move(values));
}

}  // namespace foliate
