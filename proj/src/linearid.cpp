#include "foliate/linearid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "foliate/error.hpp"

namespace foliate {

Eigen::MatrixXd AffineModel::A_at(double theta) const {
  const Eigen::VectorXd t = interpolation_weights(grid, theta);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), dim());
  for (int j = 0; j < grid.size(); ++j) out += t(j) * A[j];
  return out;
}

Eigen::VectorXd AffineModel::b_at(double theta) const {
  return b * interpolation_weights(grid, theta);
}

namespace {

Eigen::VectorXd distances(const TrajectoryDataset& data, const TorusFunction& K) {
  Eigen::VectorXd d(data.size());
  for (int k = 0; k < data.size(); ++k) d(k) = (data.x.col(k) - K(data.theta(k))).norm();
  return d;
}

}  // namespace

Eigen::VectorXd scaling_weights(const TrajectoryDataset& data, const TorusFunction& K,
                                double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("scaling weights: epsilon must be positive");
  const Eigen::VectorXd d = distances(data, K);
  return (epsilon * epsilon + d.array().square()).inverse().matrix();
}

AffineModel fit_affine(const TrajectoryDataset& data, const Eigen::VectorXd& weights,
                       const CollocationGrid& grid) {
  const int n = data.dim;
  const int M = grid.size();
  const int p = (n + 1) * M;
  if (weights.size() != data.size()) throw ValidationError("fit_affine: weight count mismatch");
  int effective = 0;
  for (int k = 0; k < data.size(); ++k) effective += weights(k) > 0.0;
  if (effective < p) {
    std::ostringstream msg;
    msg << "fit_affine: " << effective << " weighted samples for " << p
        << " unknowns per equation";
    throw ValidationError(msg.str());
  }

  // column l(n+1)+i holds x_i t_l, column l(n+1)+n holds t_l
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(p, n);
  constexpr int chunk = 1024;
  Eigen::MatrixXd rows(chunk, p);
  Eigen::MatrixXd targets(chunk, n);
  int filled = 0;
  auto flush = [&]() {
    if (filled == 0) return;
    X.selfadjointView<Eigen::Lower>().rankUpdate(rows.topRows(filled).transpose());
    Y.noalias() += rows.topRows(filled).transpose() * targets.topRows(filled);
    filled = 0;
  };
  Eigen::VectorXd xt(n + 1);
  for (int k = 0; k < data.size(); ++k) {
    const double w = weights(k);
    if (w <= 0.0) continue;
    const double sw = std::sqrt(w);
    const Eigen::VectorXd t = interpolation_weights(grid, data.theta(k));
    xt.head(n) = data.x.col(k);
    xt(n) = 1.0;
    for (int l = 0; l < M; ++l) rows.row(filled).segment(l * (n + 1), n + 1) = sw * t(l) * xt;
    targets.row(filled) = sw * data.y.col(k).transpose();
    if (++filled == chunk) flush();
  }
  flush();
  X.triangularView<Eigen::StrictlyUpper>() = X.transpose();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    const int col = static_cast<int>(qr.colsPermutation().indices()(p - 1));
    const int node = col / (n + 1), var = col % (n + 1);
    std::ostringstream msg;
    msg << "fit_affine: regression matrix is rank deficient (rank " << qr.rank() << " of " << p
        << "); the data do not excite ";
    if (var == n)
      msg << "the constant term";
    else
      msg << "state dimension " << var + 1;
    msg << " near grid node " << node;
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd At = qr.solve(Y);  // p × n, rows indexed like the columns of X

  AffineModel m;
  m.grid = grid;
  m.A.assign(M, Eigen::MatrixXd(n, n));
  m.b.resize(n, M);
  for (int l = 0; l < M; ++l) {
    m.A[l] = At.middleRows(l * (n + 1), n).transpose();
    m.b.col(l) = At.row(l * (n + 1) + n).transpose();
  }
  return m;
}

TorusFunction solve_torus(const AffineModel& model, double omega) {
  const int n = model.dim();
  const int M = model.grid.size();
  const Eigen::MatrixXd S = shift_matrix(model.grid, -omega).entries;
  // unknown K_{i,q} at index q·n + i; equation (i, l): Σ_q K_iq S_ql − Σ_p A_ip(l) K_pl = b_il
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n * M, n * M);
  Eigen::VectorXd rhs(n * M);
  for (int l = 0; l < M; ++l) {
    for (int i = 0; i < n; ++i) {
      const int row = l * n + i;
      for (int q = 0; q < M; ++q) L(row, q * n + i) += S(q, l);
      for (int p = 0; p < n; ++p) L(row, l * n + p) -= model.A[l](i, p);
      rhs(row) = model.b(i, l);
    }
  }
  // Pivots are judged against the operator scale, not the largest pivot: when
  // S − A vanishes up to rounding every pivot is tiny and a relative test passes.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < 1e-12 * scale)
    throw NumericalError("torus resonant with sampling");
  const Eigen::VectorXd k = lu.solve(rhs);
  return TorusFunction(model.grid, Eigen::Map<const Eigen::MatrixXd>(k.data(), n, M));
}

double torus_residual(const AffineModel& model, const TorusFunction& K, double omega) {
  const Eigen::MatrixXd shifted = K.values * shift_matrix(model.grid, -omega).entries;
  double r = 0.0;
  for (int l = 0; l < model.grid.size(); ++l)
    r = std::max(r, (shifted.col(l) - model.A[l] * K.values.col(l) - model.b.col(l))
                        .cwiseAbs()
                        .maxCoeff());
  return r;
}

namespace {

Eigen::MatrixXd stacked(const AffineModel& m) {
  const int n = m.dim();
  Eigen::MatrixXd s(n, (n + 1) * m.grid.size());
  for (int l = 0; l < m.grid.size(); ++l) {
    s.middleCols(l * (n + 1), n) = m.A[l];
    s.col(l * (n + 1) + n) = m.b.col(l);
  }
  return s;
}

}  // namespace

LinearIdResult iterate_linear_id(const TrajectoryDataset& data, const CollocationGrid& grid,
                                 const LinearIdOptions& opt) {
  if (!(opt.trim_fraction >= 0.0 && opt.trim_fraction < 1.0))
    throw ValidationError("linear identification: trim fraction must lie in [0, 1)");
  if (!(opt.min_keep > 0.0 && opt.min_keep <= 1.0))
    throw ValidationError("linear identification: retained fraction must lie in (0, 1]");
  if (opt.max_iter < 1) throw ValidationError("linear identification: max_iter must be positive");
  const int N = data.size();
  const int floor_count = static_cast<int>(std::ceil(opt.min_keep * N));
  const int minimum = (data.dim + 1) * grid.size();

  LinearIdResult res;
  res.weights = Eigen::VectorXd::Ones(N);
  res.active = N;
  Eigen::MatrixXd previous;
  for (int it = 1; it <= opt.max_iter; ++it) {
    res.model = fit_affine(data, res.weights, grid);
    res.K = solve_torus(res.model, data.omega);
    res.iterations = it;
    const Eigen::MatrixXd current = stacked(res.model);
    if (previous.size() != 0) {
      const double scale = std::max(current.cwiseAbs().maxCoeff(), 1e-300);
      if ((current - previous).cwiseAbs().maxCoeff() < opt.tol * scale) {
        res.converged = true;
        break;
      }
    }
    previous = current;

    const Eigen::VectorXd d = distances(data, res.K);
    const int target = std::max(
        floor_count, static_cast<int>(std::lround(res.active * (1.0 - opt.trim_fraction))));
    if (target < minimum) throw ValidationError("linear identification: too few points after trimming");
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d(a) < d(b); });
    res.weights.setZero();
    for (int r = 0; r < target; ++r) {
      const int k = order[r];
      res.weights(k) = 1.0 / (opt.epsilon * opt.epsilon + d(k) * d(k));
    }
    res.active = target;
  }
  return res;
}

void write_affine_model(std::ostream& os, const AffineModel& m) {
  const int n = m.dim();
  os << "ell=" << m.grid.ell() << " n=" << n << '\n' << std::setprecision(17);
  for (int l = 0; l < m.grid.size(); ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) os << (j ? " " : "") << m.A[l](i, j);
      os << '\n';
    }
    for (int i = 0; i < n; ++i) os << (i ? " " : "") << m.b(i, l);
    os << '\n';
  }
}

AffineModel read_affine_model(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("affine model: empty input");
  int ell = -1, n = -1;
  if (std::sscanf(header.c_str(), "ell=%d n=%d", &ell, &n) != 2 || ell < 0 || n < 1)
    throw ValidationError("affine model: bad header '" + header + "'");
  AffineModel m;
  m.grid = CollocationGrid(ell);
  m.A.assign(m.grid.size(), Eigen::MatrixXd(n, n));
  m.b.resize(n, m.grid.size());
  for (int l = 0; l < m.grid.size(); ++l) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (!(is >> m.A[l](i, j))) throw ValidationError("affine model: truncated A");
    for (int i = 0; i < n; ++i)
      if (!(is >> m.b(i, l))) throw ValidationError("affine model: truncated b");
  }
  return m;
}

}  // namespace foliate
