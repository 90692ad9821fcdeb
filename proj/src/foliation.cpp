#include "foliate/foliation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "foliate/error.hpp"

namespace foliate {

Eigen::VectorXd TransformedDataset::x(int k) const {
  Eigen::VectorXd v(dim());
  v << xp.col(k), xq.col(k);
  return v;
}

Eigen::VectorXd TransformedDataset::y(int k) const {
  Eigen::VectorXd v(dim());
  v << yp.col(k), yq.col(k);
  return v;
}

TransformedDataset transform_dataset(const TrajectoryDataset& data, const BundleFrame& frame,
                                     const TorusFunction& K) {
  if (!(K.grid == frame.grid)) throw ValidationError("transform: frame and torus grids differ");
  if (data.dim != frame.dim() || K.dim() != frame.dim())
    throw ValidationError("transform: dimension mismatch between data, frame and torus");
  TransformedDataset d;
  d.grid = frame.grid;
  d.omega = data.omega;
  d.dim_z = frame.dim_z();
  d.dim_zc = frame.dim_zc();
  const int N = data.size(), M = d.grid.size();
  d.xp.resize(d.dim_z, N);
  d.yp.resize(d.dim_z, N);
  d.xq.resize(d.dim_zc, N);
  d.yq.resize(d.dim_zc, N);
  d.t.resize(M, N);
  d.tw.resize(M, N);
  d.theta = data.theta;
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd t = interpolation_weights(d.grid, data.theta(k));
    const Eigen::VectorXd tw = interpolation_weights(d.grid, data.theta(k) + data.omega);
    d.t.col(k) = t;
    d.tw.col(k) = tw;
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(d.dim_z, data.dim), Uw = U;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(d.dim_zc, data.dim), Vw = V;
    for (int j = 0; j < M; ++j) {
      U += t(j) * frame.Ubox[j];
      V += t(j) * frame.Vbox[j];
      Uw += tw(j) * frame.Ubox[j];
      Vw += tw(j) * frame.Vbox[j];
    }
    const Eigen::VectorXd dx = data.x.col(k) - K.values * t;
    const Eigen::VectorXd dy = data.y.col(k) - K.values * tw;
    d.xp.col(k) = U * dx;
    d.xq.col(k) = V * dx;
    d.yp.col(k) = Uw * dy;
    d.yq.col(k) = Vw * dy;
  }
  return d;
}

Eigen::VectorXd reconstruct(const BundleFrame& frame, const TorusFunction& K,
                            const Eigen::VectorXd& xp, const Eigen::VectorXd& xq, double theta) {
  Eigen::MatrixXd P(frame.dim(), frame.dim());
  P << frame.U_at(theta), frame.V_at(theta);
  Eigen::VectorXd z(frame.dim());
  z << xp, xq;
  return K(theta) + P.partialPivLu().solve(z);
}

std::string to_string(ConstraintStyle s) { return s == ConstraintStyle::Anchored ? "anchored" : "graph"; }

ConstraintStyle constraint_style_from_string(const std::string& s) {
  if (s == "anchored") return ConstraintStyle::Anchored;
  if (s == "graph") return ConstraintStyle::Graph;
  throw ValidationError("unknown constraint style '" + s + "' (expected anchored or graph)");
}

FoliationModel initial_model(const BundleFrame& frame, int sigma, bool s_linear,
                             ConstraintStyle style) {
  if (sigma < 1) throw ValidationError("foliation: order sigma must be at least 1");
  FoliationModel m;
  m.grid = frame.grid;
  m.omega = frame.omega;
  m.dim_z = frame.dim_z();
  m.dim_zc = frame.dim_zc();
  m.sigma = sigma;
  m.style = style;
  const int n = m.dim(), M = m.grid.size();
  m.U = RealPoly(m.dim_z, n, sigma, m.grid);
  m.V = RealPoly(m.dim_zc, n, sigma, m.grid);
  m.R = RealPoly(m.dim_z, m.dim_z, sigma, m.grid);
  m.S = RealPoly(m.dim_zc, m.dim_zc, s_linear ? 1 : sigma, m.grid);
  for (int j = 0; j < M; ++j) {
    for (int i = 0; i < m.dim_z; ++i) m.U.coeffs[j](i, 1 + i) = 1.0;
    for (int i = 0; i < m.dim_zc; ++i) m.V.coeffs[j](i, 1 + m.dim_z + i) = 1.0;
    m.R.coeffs[j].middleCols(1, m.dim_z) = frame.Rbox[j];
    m.S.coeffs[j].middleCols(1, m.dim_zc) = frame.Sbox[j];
  }
  m.Kp = Eigen::MatrixXd::Zero(m.dim_z, M);
  m.Kq = Eigen::MatrixXd::Zero(m.dim_zc, M);
  return m;
}

std::vector<std::string> block_names(const FoliationModel& m) {
  std::vector<std::string> b{"R", "Uc", "Ul"};
  for (int d = 2; d <= m.sigma; ++d) b.push_back("Unl" + std::to_string(d));
  b.insert(b.end(), {"S", "Vc", "Vl"});
  for (int d = 2; d <= m.sigma; ++d) b.push_back("Vnl" + std::to_string(d));
  return b;
}

namespace {

struct BlockInfo {
  char poly;  // 'U', 'V', 'R', 'S'
  std::vector<int> mons;
};

BlockInfo block_info(const FoliationModel& m, const std::string& block) {
  const int dz = m.dim_z, n = m.dim();
  const MonomialSet& basis = *m.U.basis;
  BlockInfo b;
  if (block == "R" || block == "S") {
    b.poly = block[0];
    const RealPoly& p = block == "R" ? m.R : m.S;
    for (int k = 1; k < p.nmon(); ++k) b.mons.push_back(k);
    return b;
  }
  if (block.size() < 2 || (block[0] != 'U' && block[0] != 'V'))
    throw ValidationError("unknown parameter block '" + block + "'");
  b.poly = block[0];
  const bool u = block[0] == 'U';
  const std::string rest = block.substr(1);
  if (rest == "c") {
    b.mons = {0};
  } else if (rest == "l") {
    // U couples to x⊥ linearly, V to x∥
    const int lo = u ? dz : 0, hi = u ? n : dz;
    for (int v = lo; v < hi; ++v) b.mons.push_back(1 + v);
  } else if (rest.rfind("nl", 0) == 0) {
    int d = 0;
    try {
      d = std::stoi(rest.substr(2));
    } catch (const std::exception&) {
      throw ValidationError("unknown parameter block '" + block + "'");
    }
    if (d < 2 || d > m.sigma) throw ValidationError("parameter block '" + block + "' out of range");
    // anchored: U monomials contain x∥, V monomials contain x⊥; graph: swapped
    const bool need_par = (m.style == ConstraintStyle::Anchored) == u;
    for (int k = basis.degree_begin(d); k < basis.degree_end(d); ++k) {
      const auto e = basis.exponents(k);
      int par = 0;
      for (int v = 0; v < dz; ++v) par += e[v];
      const int perp = d - par;
      if (need_par ? par > 0 : perp > 0) b.mons.push_back(k);
    }
  } else {
    throw ValidationError("unknown parameter block '" + block + "'");
  }
  return b;
}

const RealPoly& poly_of(const FoliationModel& m, char c) {
  switch (c) {
    case 'U': return m.U;
    case 'V': return m.V;
    case 'R': return m.R;
    default: return m.S;
  }
}

RealPoly& poly_of(FoliationModel& m, char c) {
  return const_cast<RealPoly&>(poly_of(static_cast<const FoliationModel&>(m), c));
}

// Σ_j t_j C_j φ for every column of Φ.
Eigen::MatrixXd encode(const RealPoly& p, const Eigen::MatrixXd& phi, const Eigen::MatrixXd& t) {
  if (p.nodes() == 1) return p.coeffs[0] * phi;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.nout, phi.cols());
  for (int j = 0; j < p.nodes(); ++j)
    out.array() += (p.coeffs[j] * phi).array().rowwise() * t.row(j).array();
  return out;
}

// Values of a conjugate map at every z (columns), optionally with Jacobians.
Eigen::MatrixXd conj_eval(const RealPoly& p, const Eigen::MatrixXd& z, const Eigen::MatrixXd& t,
                          std::vector<Eigen::MatrixXd>* jac) {
  const int N = static_cast<int>(z.cols());
  Eigen::MatrixXd out(p.nout, N);
  if (jac) jac->resize(N);
  Eigen::VectorXd psi(p.nmon());
  Eigen::MatrixXd C(p.nout, p.nmon());
  for (int k = 0; k < N; ++k) {
    p.basis->evaluate(z.col(k), psi);
    if (p.nodes() == 1) {
      C = p.coeffs[0];
    } else {
      C.setZero();
      for (int j = 0; j < p.nodes(); ++j) C += t(j, k) * p.coeffs[j];
    }
    out.col(k) = C * psi;
    if (jac) (*jac)[k] = C * p.basis->gradient<double>(psi);
  }
  return out;
}

Eigen::MatrixXd all_monomials(const MonomialSet& basis, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd phi(basis.size(), x.cols());
  Eigen::VectorXd col(basis.size());
  for (int k = 0; k < x.cols(); ++k) {
    basis.evaluate(x.col(k), col);
    phi.col(k) = col;
  }
  return phi;
}

Eigen::MatrixXd stacked(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd s(a.rows() + b.rows(), a.cols());
  s << a, b;
  return s;
}

}  // namespace

std::vector<int> block_monomials(const FoliationModel& m, const std::string& block) {
  return block_info(m, block).mons;
}

Eigen::VectorXd eval_U(const FoliationModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
  Eigen::VectorXd phi(m.U.nmon());
  m.U.basis->evaluate(x, phi);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.dim_z);
  for (int j = 0; j < m.grid.size(); ++j) out += t(j) * (m.U.coeffs[j] * phi);
  return out;
}

Eigen::VectorXd eval_V(const FoliationModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
  Eigen::VectorXd phi(m.V.nmon());
  m.V.basis->evaluate(x, phi);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.dim_zc);
  for (int j = 0; j < m.grid.size(); ++j) out += t(j) * (m.V.coeffs[j] * phi);
  return out;
}

Eigen::VectorXd foliation_weights(const FoliationModel& m, const TransformedDataset& d,
                                  double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("foliation weights: epsilon must be positive");
  Eigen::VectorXd w(d.size());
  for (int k = 0; k < d.size(); ++k) {
    const double r2 = (d.xp.col(k) - m.Kp * d.t.col(k)).squaredNorm() +
                      (d.xq.col(k) - m.Kq * d.t.col(k)).squaredNorm();
    w(k) = 1.0 + 1.0 / (epsilon * epsilon + r2);
  }
  return w;
}

double loss(const FoliationModel& m, const TransformedDataset& d, const Eigen::VectorXd& weights) {
  if (weights.size() != d.size()) throw ValidationError("loss: weight count mismatch");
  const MonomialSet& basis = *m.U.basis;
  const Eigen::MatrixXd phix = all_monomials(basis, stacked(d.xp, d.xq));
  const Eigen::MatrixXd phiy = all_monomials(basis, stacked(d.yp, d.yq));
  const Eigen::MatrixXd ru =
      conj_eval(m.R, encode(m.U, phix, d.t), d.t, nullptr) - encode(m.U, phiy, d.tw);
  const Eigen::MatrixXd rv =
      conj_eval(m.S, encode(m.V, phix, d.t), d.t, nullptr) - encode(m.V, phiy, d.tw);
  return (ru.colwise().squaredNorm() + rv.colwise().squaredNorm()).dot(weights.transpose());
}

void solve_inner_torus(FoliationModel& m, double tol, int max_iter) {
  const int n = m.dim(), dz = m.dim_z;
  for (int j = 0; j < m.grid.size(); ++j) {
    Eigen::VectorXd k(n);
    k << m.Kp.col(j), m.Kq.col(j);
    auto residual = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd g(n);
      g << m.U.eval_node(j, v), m.V.eval_node(j, v);
      return g;
    };
    Eigen::VectorXd g = residual(k);
    for (int it = 0; it < max_iter && g.lpNorm<Eigen::Infinity>() > tol; ++it) {
      Eigen::MatrixXd J(n, n);
      J << m.U.jacobian_node(j, k), m.V.jacobian_node(j, k);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
      const Eigen::VectorXd step = lu.solve(g);
      if (!step.allFinite()) break;
      // halve the step until the residual decreases
      double s = 1.0;
      Eigen::VectorXd trial = k - step, gt = residual(trial);
      while (gt.norm() >= g.norm() && s > 1e-6) {
        s *= 0.5;
        trial = k - s * step;
        gt = residual(trial);
      }
      k = trial;
      g = gt;
    }
    if (!(g.lpNorm<Eigen::Infinity>() <= std::max(tol, 1e-10))) {
      std::ostringstream msg;
      msg << "inner torus: Newton iteration diverged at grid node " << j << " (residual "
          << g.lpNorm<Eigen::Infinity>() << ")";
      throw NumericalError(msg.str());
    }
    m.Kp.col(j) = k.head(dz);
    m.Kq.col(j) = k.tail(n - dz);
  }
}

FoliationFitter::FoliationFitter(const TransformedDataset& data, FoliationModel initial,
                                 FitOptions opt)
    : data_(data), model_(std::move(initial)), opt_(std::move(opt)) {
  if (data_.size() == 0) throw ValidationError("foliation fit: empty dataset");
  if (data_.dim_z != model_.dim_z || data_.dim_zc != model_.dim_zc)
    throw ValidationError("foliation fit: model and data dimensions differ");
  const MonomialSet& basis = *model_.U.basis;
  phix_ = all_monomials(basis, stacked(data_.xp, data_.xq));
  phiy_ = all_monomials(basis, stacked(data_.yp, data_.yq));
  all_.resize(data_.size());
  std::iota(all_.begin(), all_.end(), 0);
  v_active_ = all_;
  delta_ = foliation_weights(model_, data_, opt_.epsilon);
}

bool FoliationFitter::is_u_side(const std::string& block) const {
  const char c = block_info(model_, block).poly;
  return c == 'U' || c == 'R';
}

Eigen::VectorXd FoliationFitter::parameters(const std::string& block) const {
  const BlockInfo b = block_info(model_, block);
  const RealPoly& p = poly_of(model_, b.poly);
  const int M = p.nodes(), nb = static_cast<int>(b.mons.size());
  Eigen::VectorXd v(p.nout * M * nb);
  for (int i = 0; i < p.nout; ++i)
    for (int j = 0; j < M; ++j)
      for (int a = 0; a < nb; ++a) v((i * M + j) * nb + a) = p.coeffs[j](i, b.mons[a]);
  return v;
}

void FoliationFitter::set_parameters(const std::string& block, const Eigen::VectorXd& v) {
  const BlockInfo b = block_info(model_, block);
  RealPoly& p = poly_of(model_, b.poly);
  const int M = p.nodes(), nb = static_cast<int>(b.mons.size());
  if (v.size() != p.nout * M * nb) throw ValidationError("set_parameters: wrong parameter count");
  for (int i = 0; i < p.nout; ++i)
    for (int j = 0; j < M; ++j)
      for (int a = 0; a < nb; ++a) p.coeffs[j](i, b.mons[a]) = v((i * M + j) * nb + a);
}

double FoliationFitter::side_loss(bool u_side, const std::vector<int>* subset) const {
  const RealPoly& E = u_side ? model_.U : model_.V;
  const RealPoly& C = u_side ? model_.R : model_.S;
  const Eigen::MatrixXd r =
      conj_eval(C, encode(E, phix_, data_.t), data_.t, nullptr) - encode(E, phiy_, data_.tw);
  const Eigen::VectorXd e = r.colwise().squaredNorm().transpose();
  if (!subset) return e.dot(delta_);
  double s = 0.0;
  for (int k : *subset) s += delta_(k) * e(k);
  return s;
}

double FoliationFitter::loss() const { return side_loss(true, nullptr) + side_loss(false, &v_active_); }

double FoliationFitter::block_loss(const std::string& block) const {
  const bool u = is_u_side(block);
  return side_loss(u, u ? nullptr : &v_active_);
}

void FoliationFitter::assemble(const std::string& block, Eigen::MatrixXd& H, Eigen::VectorXd& g,
                               double& value) const {
  const BlockInfo b = block_info(model_, block);
  const bool u = b.poly == 'U' || b.poly == 'R';
  const bool conj_block = b.poly == 'R' || b.poly == 'S';
  const RealPoly& E = u ? model_.U : model_.V;
  const RealPoly& C = u ? model_.R : model_.S;
  const std::vector<int>& pts = u ? all_ : v_active_;
  const int M = data_.grid.size();
  const int nout = E.nout;
  const int nb = static_cast<int>(b.mons.size());
  const int P = nout * M * nb;

  // evaluate only on the active points
  const int Np = static_cast<int>(pts.size());
  Eigen::MatrixXd px(phix_.rows(), Np), py(phiy_.rows(), Np), t(M, Np), tw(M, Np);
  for (int q = 0; q < Np; ++q) {
    px.col(q) = phix_.col(pts[q]);
    py.col(q) = phiy_.col(pts[q]);
    t.col(q) = data_.t.col(pts[q]);
    tw.col(q) = data_.tw.col(pts[q]);
  }
  const Eigen::MatrixXd zx = encode(E, px, t);
  const Eigen::MatrixXd zy = encode(E, py, tw);
  std::vector<Eigen::MatrixXd> jac;
  const Eigen::MatrixXd res = conj_eval(C, zx, t, conj_block ? nullptr : &jac) - zy;

  H = Eigen::MatrixXd::Zero(P, P);
  g = Eigen::VectorXd::Zero(P);
  value = 0.0;
  constexpr int chunk_points = 512;
  Eigen::MatrixXd rows(chunk_points * nout, P);
  Eigen::VectorXd rhs(chunk_points * nout);
  Eigen::VectorXd psi(C.nmon());
  for (int q0 = 0; q0 < Np; q0 += chunk_points) {
    const int q1 = std::min(Np, q0 + chunk_points);
    const int nr = (q1 - q0) * nout;
    rows.topRows(nr).setZero();
    for (int q = q0; q < q1; ++q) {
      const double sw = std::sqrt(delta_(pts[q]));
      value += delta_(pts[q]) * res.col(q).squaredNorm();
      const int r0 = (q - q0) * nout;
      if (conj_block) {
        C.basis->evaluate(zx.col(q), psi);
        for (int r = 0; r < nout; ++r)
          for (int j = 0; j < M; ++j)
            for (int a = 0; a < nb; ++a)
              rows(r0 + r, (r * M + j) * nb + a) = sw * t(j, q) * psi(b.mons[a]);
      } else {
        const Eigen::MatrixXd& DR = jac[q];
        for (int r = 0; r < nout; ++r)
          for (int i = 0; i < nout; ++i) {
            const double dri = DR(r, i);
            for (int j = 0; j < M; ++j) {
              const double ta = sw * t(j, q) * dri;
              const double tb = (r == i) ? sw * tw(j, q) : 0.0;
              double* row = &rows(r0 + r, 0);
              const int base = (i * M + j) * nb;
              for (int a = 0; a < nb; ++a)
                row[static_cast<std::ptrdiff_t>(base + a) * rows.rows()] =
                    ta * px(b.mons[a], q) - tb * py(b.mons[a], q);
            }
          }
      }
      for (int r = 0; r < nout; ++r) rhs(r0 + r) = sw * res(r, q);
    }
    H.selfadjointView<Eigen::Lower>().rankUpdate(rows.topRows(nr).transpose());
    g.noalias() += rows.topRows(nr).transpose() * rhs.head(nr);
  }
  H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
}

Eigen::VectorXd FoliationFitter::gradient(const std::string& block) const {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double v;
  assemble(block, H, g, v);
  return 2.0 * g;
}

int FoliationFitter::minimize_block(const std::string& block, int iterations) {
  double& mu = damping_.try_emplace(block, 1e-6).first->second;
  int accepted = 0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    double value;
    assemble(block, H, g, value);
    if (g.size() == 0 || value == 0.0) break;
    const Eigen::VectorXd p0 = parameters(block);
    Eigen::VectorXd diag = H.diagonal();
    const double dmax = diag.maxCoeff();
    if (!(dmax > 0.0)) break;
    diag = diag.cwiseMax(1e-12 * dmax);
    bool ok = false;
    double predicted = 0.0;
    while (mu <= 1e10) {
      Eigen::MatrixXd A = H;
      A.diagonal() += mu * diag;
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      predicted = -(g.dot(step) + 0.5 * step.dot(H * step));
      if (!step.allFinite()) {
        mu *= 10.0;
        continue;
      }
      set_parameters(block, p0 + step);
      const double trial = block_loss(block);
      if (std::isfinite(trial) && trial < value) {
        ok = true;
        mu = std::max(mu / 10.0, 1e-12);
        break;
      }
      set_parameters(block, p0);
      mu *= 10.0;
    }
    if (!ok) {
      // failure only matters while the model still predicts a real decrease
      if (predicted > 1e-8 * value) throw NumericalError("foliation fit: block " + block +
                                                        " failed to decrease the loss");
      mu = 1e-6;
      break;
    }
    ++accepted;
    if (predicted < 1e-12 * value) break;
  }
  return accepted;
}

void FoliationFitter::refresh() {
  solve_inner_torus(model_);
  delta_ = foliation_weights(model_, data_, opt_.epsilon);
}

void FoliationFitter::update_filter() {
  const int N = data_.size();
  const Eigen::MatrixXd v = encode(model_.V, phix_, data_.t);
  const Eigen::VectorXd norm = v.colwise().norm().transpose();
  // The active set only shrinks. Re-admitting points lets spurious zeros of
  // V far from the fitted region pull in data that V has never seen.
  const int A = static_cast<int>(v_active_.size());
  const int keep = std::min(
      A, std::max(static_cast<int>(std::ceil(opt_.filter_quantile * A)),
                  static_cast<int>(std::ceil(opt_.filter_min * N))));
  std::vector<int> order = v_active_;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return norm(a) < norm(b); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  v_active_ = std::move(order);
}

FitReport FoliationFitter::run() {
  FitReport rep;
  const auto names = block_names(model_);
  refresh();
  double previous = loss();
  rep.loss_history.push_back(previous);
  for (int sweep = 1; sweep <= opt_.max_sweeps; ++sweep) {
    update_filter();
    for (const auto& name : names) {
      if (!opt_.only_blocks.empty() && !opt_.only_blocks.count(name)) continue;
      minimize_block(name, opt_.block_iterations);
      refresh();
    }
    const double current = loss();
    rep.loss_history.push_back(current);
    rep.sweeps = sweep;
    if (opt_.log) {
      std::ostringstream msg;
      msg << "sweep " << sweep << " loss " << std::setprecision(10) << current;
      opt_.log(msg.str());
    }
    if (previous - current >= 0.0 && previous - current < opt_.tol * previous) {
      rep.converged = true;
      break;
    }
    previous = current;
  }
  return rep;
}

FoliationModel fit_foliations(const TransformedDataset& data, const BundleFrame& frame,
                              const FitOptions& opt, FitReport* report) {
  const bool s_linear = opt.s_linear < 0 ? frame.dim() > 6 : opt.s_linear > 0;
  FoliationFitter fitter(data, initial_model(frame, opt.sigma, s_linear, opt.style), opt);
  const FitReport rep = fitter.run();
  if (report) *report = rep;
  return fitter.model();
}

double ErrorSummary::median_below(double max_amp) const {
  std::vector<double> v;
  for (int k = 0; k < erel.size(); ++k)
    if (amplitude(k) > 1e-12 && amplitude(k) <= max_amp) v.push_back(erel(k));
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

ErrorSummary relative_error(const FoliationModel& m, const TransformedDataset& d, int bins) {
  const MonomialSet& basis = *m.U.basis;
  const Eigen::MatrixXd phix = all_monomials(basis, stacked(d.xp, d.xq));
  const Eigen::MatrixXd phiy = all_monomials(basis, stacked(d.yp, d.yq));
  const Eigen::MatrixXd r =
      conj_eval(m.R, encode(m.U, phix, d.t), d.t, nullptr) - encode(m.U, phiy, d.tw);
  ErrorSummary s;
  const int N = d.size();
  s.erel.resize(N);
  s.amplitude.resize(N);
  for (int k = 0; k < N; ++k) {
    const double a = std::sqrt((d.xp.col(k) - m.Kp * d.t.col(k)).squaredNorm() +
                               (d.xq.col(k) - m.Kq * d.t.col(k)).squaredNorm());
    s.amplitude(k) = a;
    s.erel(k) = a > 1e-12 ? r.col(k).norm() / a : std::numeric_limits<double>::quiet_NaN();
  }
  bins = std::max(bins, 1);
  const double amax = N > 0 ? s.amplitude.maxCoeff() : 0.0;
  std::vector<std::vector<double>> groups(bins);
  for (int k = 0; k < N; ++k) {
    if (!(s.amplitude(k) > 1e-12)) continue;
    const int b = std::min(bins - 1, static_cast<int>(s.amplitude(k) / amax * bins));
    groups[b].push_back(s.erel(k));
  }
  for (int b = 0; b <= bins; ++b) s.bin_edges.push_back(amax * b / bins);
  for (auto& g : groups) {
    s.bin_count.push_back(static_cast<int>(g.size()));
    s.bin_median.push_back(quantile(g, 0.5));
    s.bin_p90.push_back(quantile(g, 0.9));
  }
  return s;
}

void write_poly(std::ostream& os, const std::string& name, const RealPoly& p) {
  const auto prec = os.precision(17);
  os << "poly " << name << " nout=" << p.nout << " nvars=" << p.nvars()
     << " degree=" << p.max_degree() << '\n';
  for (const auto& c : p.coeffs) {
    for (int i = 0; i < c.rows(); ++i) {
      for (int k = 0; k < c.cols(); ++k) os << (k ? " " : "") << c(i, k);
      os << '\n';
    }
  }
  os.precision(prec);
}

RealPoly read_poly(std::istream& is, const std::string& name, const CollocationGrid& grid) {
  std::string word, got;
  is >> word >> got;
  if (word != "poly" || got != name) throw ValidationError("expected polynomial block '" + name + "'");
  std::string a, b, c;
  is >> a >> b >> c;
  int nout, nvars, deg;
  if (std::sscanf(a.c_str(), "nout=%d", &nout) != 1 || std::sscanf(b.c_str(), "nvars=%d", &nvars) != 1 ||
      std::sscanf(c.c_str(), "degree=%d", &deg) != 1 || nout < 1 || nvars < 1 || deg < 0)
    throw ValidationError("bad header of polynomial block '" + name + "'");
  RealPoly p(nout, nvars, deg, grid);
  for (auto& m : p.coeffs)
    for (int i = 0; i < m.rows(); ++i)
      for (int k = 0; k < m.cols(); ++k)
        if (!(is >> m(i, k))) throw ValidationError("truncated polynomial block '" + name + "'");
  return p;
}

void write_foliation(std::ostream& os, const FoliationModel& m) {
  os << std::setprecision(17);
  os << "foliation ell=" << m.grid.ell() << " dimz=" << m.dim_z << " dimzc=" << m.dim_zc
     << " sigma=" << m.sigma << " style=" << to_string(m.style) << " omega=" << m.omega << '\n';
  write_poly(os, "U", m.U);
  write_poly(os, "V", m.V);
  write_poly(os, "R", m.R);
  write_poly(os, "S", m.S);
  os << "torus\n";
  for (int i = 0; i < m.Kp.rows(); ++i) {
    for (int j = 0; j < m.Kp.cols(); ++j) os << (j ? " " : "") << m.Kp(i, j);
    os << '\n';
  }
  for (int i = 0; i < m.Kq.rows(); ++i) {
    for (int j = 0; j < m.Kq.cols(); ++j) os << (j ? " " : "") << m.Kq(i, j);
    os << '\n';
  }
}

FoliationModel read_foliation(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("foliation model: empty input");
  int ell, dz, dzc, sigma;
  char style[16] = {0};
  double omega;
  if (std::sscanf(header.c_str(), "foliation ell=%d dimz=%d dimzc=%d sigma=%d style=%15s omega=%lf",
                  &ell, &dz, &dzc, &sigma, style, &omega) != 6 ||
      ell < 0 || dz < 1 || dzc < 1 || sigma < 1)
    throw ValidationError("foliation model: bad header '" + header + "'");
  FoliationModel m;
  m.grid = CollocationGrid(ell);
  m.omega = omega;
  m.dim_z = dz;
  m.dim_zc = dzc;
  m.sigma = sigma;
  m.style = constraint_style_from_string(style);
  m.U = read_poly(is, "U", m.grid);
  m.V = read_poly(is, "V", m.grid);
  m.R = read_poly(is, "R", m.grid);
  m.S = read_poly(is, "S", m.grid);
  if (m.U.nout != dz || m.U.nvars() != dz + dzc || m.V.nout != dzc || m.R.nvars() != dz ||
      m.S.nvars() != dzc)
    throw ValidationError("foliation model: block shapes disagree with the header");
  std::string word;
  is >> word;
  if (word != "torus") throw ValidationError("foliation model: missing torus block");
  m.Kp.resize(dz, m.grid.size());
  m.Kq.resize(dzc, m.grid.size());
  for (int i = 0; i < dz; ++i)
    for (int j = 0; j < m.grid.size(); ++j)
      if (!(is >> m.Kp(i, j))) throw ValidationError("foliation model: truncated torus");
  for (int i = 0; i < dzc; ++i)
    for (int j = 0; j < m.grid.size(); ++j)
      if (!(is >> m.Kq(i, j))) throw ValidationError("foliation model: truncated torus");
  return m;
}

}  // namespace foliate
