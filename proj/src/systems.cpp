#include "foliate/systems.hpp"

#include <cmath>
#include <sstream>

#include "foliate/error.hpp"

namespace foliate {

Eigen::VectorXd shaw_pierre_rhs(const Eigen::VectorXd& x, double theta,
                                const ShawPierreParams& p) {
  if (x.size() != 4) throw ValidationError("shaw-pierre: state must have 4 components");
  Eigen::VectorXd dx(4);
  dx(0) = x(2);
  dx(1) = x(3);
  dx(2) = -p.c * x(2) - p.k * x(0) - p.kappa * x(0) * x(0) * x(0) + p.k * (x(1) - x(0)) +
          p.c * (x(3) - x(2)) + p.A * std::cos(theta + 0.1);
  dx(3) = -p.c * x(3) - p.k * x(1) - p.k * (x(1) - x(0)) - p.c * (x(3) - x(2)) +
          p.A * std::cos(theta);
  return dx;
}

Eigen::MatrixXd shaw_pierre_jacobian(const Eigen::VectorXd& x, const ShawPierreParams& p) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
  J(0, 2) = 1.0;
  J(1, 3) = 1.0;
  J(2, 0) = -2.0 * p.k - 3.0 * p.kappa * x(0) * x(0);
  J(2, 1) = p.k;
  J(2, 2) = -2.0 * p.c;
  J(2, 3) = p.c;
  J(3, 0) = p.k;
  J(3, 1) = -2.0 * p.k;
  J(3, 2) = p.c;
  J(3, 3) = -2.0 * p.c;
  return J;
}

ForcedSystem make_shaw_pierre(const ShawPierreParams& p, double omega0) {
  ForcedSystem s;
  s.name = "shawpierre";
  s.dim = 4;
  s.rhs = [p](const Eigen::VectorXd& x, double th) { return shaw_pierre_rhs(x, th, p); };
  s.jacobian = [p](const Eigen::VectorXd& x, double) { return shaw_pierre_jacobian(x, p); };
  s.omega0 = omega0;
  s.params = {{"k", p.k}, {"kappa", p.kappa}, {"c", p.c}, {"A", p.A}};
  return s;
}

namespace {

double optimal_velocity(double h) {
  const double d = h - 1.0;
  return d * d / (1.0 + d * d);
}

double optimal_velocity_slope(double h) {
  const double d = h - 1.0;
  const double q = 1.0 + d * d;
  return 2.0 * d / (q * q);
}

}  // namespace

Eigen::VectorXd traffic_rhs(const Eigen::VectorXd& x, double theta, const TrafficParams& p) {
  constexpr int n = kTrafficCars;
  if (x.size() != kTrafficDim) throw ValidationError("traffic: state must have 9 components");
  const auto v = x.head(n);
  const auto hs = x.tail(n - 1);
  Eigen::VectorXd h(n);
  h(0) = p.L - hs.sum();
  h.tail(n - 1) = hs;
  Eigen::VectorXd dx(kTrafficDim);
  for (int k = 0; k < n; ++k) {
    const double vmax = (k == n - 1) ? 1.0 + p.A * std::cos(theta) : 1.0;
    dx(k) = p.alpha * (vmax * optimal_velocity(h(k)) - v(k));
  }
  for (int k = 1; k < n; ++k) dx(n + k - 1) = v(k - 1) - v(k);
  return dx;
}

Eigen::MatrixXd traffic_jacobian(const Eigen::VectorXd& x, double theta,
                                 const TrafficParams& p) {
  constexpr int n = kTrafficCars;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(kTrafficDim, kTrafficDim);
  const double h1 = p.L - x.tail(n - 1).sum();
  for (int k = 0; k < n; ++k) {
    const double vmax = (k == n - 1) ? 1.0 + p.A * std::cos(theta) : 1.0;
    J(k, k) = -p.alpha;
    if (k == 0) {
      // h₁ depends on every other headway
      const double s = p.alpha * vmax * optimal_velocity_slope(h1);
      for (int j = 1; j < n; ++j) J(0, n + j - 1) = -s;
    } else {
      J(k, n + k - 1) = p.alpha * vmax * optimal_velocity_slope(x(n + k - 1));
    }
  }
  for (int k = 1; k < n; ++k) {
    J(n + k - 1, k - 1) = 1.0;
    J(n + k - 1, k) = -1.0;
  }
  return J;
}

Eigen::VectorXd traffic_equilibrium(const TrafficParams& p) {
  constexpr int n = kTrafficCars;
  Eigen::VectorXd x(kTrafficDim);
  const double h = p.L / n;
  x.head(n).setConstant(optimal_velocity(h));
  x.tail(n - 1).setConstant(h);
  return x;
}

ForcedSystem make_traffic(const TrafficParams& p, double omega0) {
  ForcedSystem s;
  s.name = "traffic";
  s.dim = kTrafficDim;
  s.rhs = [p](const Eigen::VectorXd& x, double th) { return traffic_rhs(x, th, p); };
  s.jacobian = [p](const Eigen::VectorXd& x, double th) { return traffic_jacobian(x, th, p); };
  s.omega0 = omega0;
  s.params = {{"alpha", p.alpha}, {"L", p.L}, {"A", p.A}};
  return s;
}

ForcedSystem make_system(const std::string& name,
                         const std::map<std::string, double>& overrides, double omega0) {
  auto get = [&](const char* key, double def) {
    auto it = overrides.find(key);
    return it == overrides.end() ? def : it->second;
  };
  if (name == "shawpierre" || name == "shaw_pierre" || name == "shaw-pierre") {
    ShawPierreParams p;
    p.k = get("k", p.k);
    p.kappa = get("kappa", p.kappa);
    p.c = get("c", p.c);
    p.A = get("A", p.A);
    for (const auto& [key, _] : overrides)
      if (key != "k" && key != "kappa" && key != "c" && key != "A")
        throw ValidationError("shawpierre: unknown parameter '" + key + "'");
    return make_shaw_pierre(p, omega0);
  }
  if (name == "traffic") {
    TrafficParams p;
    p.alpha = get("alpha", p.alpha);
    p.L = get("L", p.L);
    p.A = get("A", p.A);
    for (const auto& [key, _] : overrides)
      if (key != "alpha" && key != "L" && key != "A")
        throw ValidationError("traffic: unknown parameter '" + key + "'");
    return make_traffic(p, omega0);
  }
  throw ValidationError("unknown system '" + name + "'");
}

namespace {

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "integration produced a non-finite state at t = " << t;
    throw NumericalError(msg.str());
  }
}

}  // namespace

std::vector<Eigen::VectorXd> integrate(const ForcedSystem& sys, const Eigen::VectorXd& x0,
                                       double theta0, double dt, int steps, int substeps) {
  if (substeps < 1) throw ValidationError("integrate: substeps must be at least 1");
  if (steps < 0) throw ValidationError("integrate: steps must be nonnegative");
  std::vector<Eigen::VectorXd> out;
  out.reserve(steps + 1);
  out.push_back(x0);
  const double h = dt / substeps;
  Eigen::VectorXd x = x0;
  for (int s = 0; s < steps; ++s) {
    for (int q = 0; q < substeps; ++q) {
      // time measured from the start to keep θ exact
      const double t = s * dt + q * h;
      const double th = theta0 + sys.omega0 * t;
      const double thm = th + 0.5 * sys.omega0 * h;
      const double th1 = th + sys.omega0 * h;
      const Eigen::VectorXd k1 = sys.rhs(x, th);
      const Eigen::VectorXd k2 = sys.rhs(x + 0.5 * h * k1, thm);
      const Eigen::VectorXd k3 = sys.rhs(x + 0.5 * h * k2, thm);
      const Eigen::VectorXd k4 = sys.rhs(x + h * k3, th1);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check_finite(x, (s + 1) * dt);
    out.push_back(x);
  }
  return out;
}

FlowWithJacobian flow_with_jacobian(const ForcedSystem& sys, const Eigen::VectorXd& x0,
                                    double theta0, double dt, int substeps) {
  if (!sys.jacobian) throw ValidationError("flow_with_jacobian: system has no Jacobian");
  if (substeps < 1) throw ValidationError("flow_with_jacobian: substeps must be at least 1");
  const int n = sys.dim;
  const double h = dt / substeps;
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  for (int q = 0; q < substeps; ++q) {
    const double th = theta0 + sys.omega0 * q * h;
    const double thm = th + 0.5 * sys.omega0 * h;
    const double th1 = th + sys.omega0 * h;
    const Eigen::VectorXd k1 = sys.rhs(x, th);
    const Eigen::MatrixXd K1 = sys.jacobian(x, th) * P;
    const Eigen::VectorXd xa = x + 0.5 * h * k1;
    const Eigen::VectorXd k2 = sys.rhs(xa, thm);
    const Eigen::MatrixXd K2 = sys.jacobian(xa, thm) * (P + 0.5 * h * K1);
    const Eigen::VectorXd xb = x + 0.5 * h * k2;
    const Eigen::VectorXd k3 = sys.rhs(xb, thm);
    const Eigen::MatrixXd K3 = sys.jacobian(xb, thm) * (P + 0.5 * h * K2);
    const Eigen::VectorXd xc = x + h * k3;
    const Eigen::VectorXd k4 = sys.rhs(xc, th1);
    const Eigen::MatrixXd K4 = sys.jacobian(xc, th1) * (P + h * K3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    P += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
  }
  check_finite(x, dt);
  return {x, P};
}

}  // namespace foliate
