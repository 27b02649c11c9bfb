#include "colabel/diff.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "colabel/errors.hpp"

namespace colabel {
namespace {

// Rows per chunk. Chosen so one chunk's per-layer channel stacks stay near
// cache while the GEMMs remain large enough to run at full rate.
constexpr int kChunkRows = 512;

// Eigen vectorizes exp() for doubles but not tanh(); this form is exact to
// one ulp and saturates correctly for large |z|.
inline void tanh_into(const Eigen::Ref<const Eigen::MatrixXd>& z,
                      Eigen::Ref<Eigen::MatrixXd> out) {
  out.array() = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
}

// Channel layout of a stacked batch: block 0 carries values, then one block
// per tracked first derivative, then one per tracked second derivative.
// Coordinates with a second-derivative channel always have a first-derivative
// channel too (the propagation rule needs it).
struct Plan {
  int dim = 0;
  std::vector<int> first;
  std::vector<int> second;

  int chan() const { return 1 + static_cast<int>(first.size() + second.size()); }

  int first_pos(int coord) const {
    for (std::size_t k = 0; k < first.size(); ++k)
      if (first[k] == coord) return static_cast<int>(k);
    return -1;
  }
};

void check_spec(const DerivativeSpec& spec, int dim) {
  for (int c : spec.first)
    if (c < 0 || c >= dim) throw ConfigError("derivative spec: first-order index out of range");
  for (int c : spec.second)
    if (c < 0 || c >= dim) throw ConfigError("derivative spec: second-order index out of range");
}

Plan make_plan(const DerivativeSpec& spec, int dim, bool all_first) {
  check_spec(spec, dim);
  Plan p;
  p.dim = dim;
  std::set<int> f(spec.first.begin(), spec.first.end());
  std::set<int> s(spec.second.begin(), spec.second.end());
  if (all_first)
    for (int c = 0; c < dim; ++c) f.insert(c);
  for (int c : s) f.insert(c);
  p.first.assign(f.begin(), f.end());
  p.second.assign(s.begin(), s.end());
  return p;
}

// Forward/backward state for one chunk of points under a fixed plan and
// network shape. Buffers are reused across chunks and training steps.
class ChunkWork {
 public:
  void configure(const MlpModel& m, const Plan& plan, int max_rows) {
    plan_ = plan;
    sizes_ = m.layer_sizes;
    max_rows_ = max_rows;
    const int L = m.num_layers();
    const int stack = plan_.chan() * max_rows;
    A_.assign(L + 1, {});
    Z_.assign(L + 1, {});
    int max_w = 0;
    for (int l = 0; l <= L; ++l) {
      A_[l].resize(stack, m.layer_sizes[l]);
      if (l > 0) Z_[l].resize(stack, m.layer_sizes[l]);
      max_w = std::max(max_w, m.layer_sizes[l]);
    }
    adj_a_.resize(stack, max_w);
    adj_z_.resize(stack, max_w);
    seed_.resize(stack);
  }

  bool matches(const MlpModel& m, const Plan& plan, int max_rows) const {
    return sizes_ == m.layer_sizes && max_rows_ == max_rows && plan_.dim == plan.dim &&
           plan_.first == plan.first && plan_.second == plan.second;
  }

  const Plan& plan() const { return plan_; }

  void forward(const MlpModel& m, const Point* pts, int nr) {
    nr_ = nr;
    const int L = static_cast<int>(sizes_.size()) - 1;
    const int F = static_cast<int>(plan_.first.size());
    const int S = static_cast<int>(plan_.second.size());
    const int cn = plan_.chan() * nr;

    for (int i = 0; i < nr; ++i)
      for (int c = 0; c < plan_.dim; ++c) A_[0](i, c) = pts[i][c];
    for (int k = 0; k < F; ++k) {
      auto blk = A_[0].middleRows((1 + k) * nr, nr);
      blk.setZero();
      blk.col(plan_.first[k]).setOnes();
    }
    for (int k = 0; k < S; ++k) A_[0].middleRows((1 + F + k) * nr, nr).setZero();

    for (int l = 1; l <= L; ++l) {
      Z_[l].topRows(cn).noalias() = A_[l - 1].topRows(cn) * m.weight(l - 1).transpose();
      Z_[l].topRows(nr).rowwise() += m.bias(l - 1).transpose();
      if (l < L)
        activate(l);
      else
        A_[L].topRows(cn) = Z_[L].topRows(cn);
    }
  }

  double value(int i) const { return A_.back()(i, 0); }

  Jet jet(int i) const {
    const int F = static_cast<int>(plan_.first.size());
    Jet j;
    j.u = A_.back()(i, 0);
    for (int k = 0; k < F; ++k) j.du[plan_.first[k]] = A_.back()((1 + k) * nr_ + i, 0);
    for (std::size_t k = 0; k < plan_.second.size(); ++k)
      j.set_d2(plan_.second[k], A_.back()((1 + F + static_cast<int>(k)) * nr_ + i, 0));
    return j;
  }

  // Seed layout mirrors the output stack: entry c*nr + i is the adjoint of
  // output channel c at point i.
  Eigen::VectorXd& seed() { return seed_; }

  void backward(const MlpModel& m, Eigen::VectorXd& grad) {
    const int L = static_cast<int>(sizes_.size()) - 1;
    const int cn = plan_.chan() * nr_;

    adj_z_.topRows(cn).col(0) = seed_.head(cn);
    for (int l = L; l >= 1; --l) {
      const int w = sizes_[l], wp = sizes_[l - 1];
      auto az = adj_z_.topRows(cn).leftCols(w);
      Eigen::Map<Eigen::MatrixXd> gW(grad.data() + m.weight_offset(l - 1), w, wp);
      gW.noalias() += az.transpose() * A_[l - 1].topRows(cn);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + m.bias_offset(l - 1), w);
      gb.noalias() += az.topRows(nr_).colwise().sum().transpose();
      if (l > 1) {
        adj_a_.topRows(cn).leftCols(wp).noalias() = az * m.weight(l - 1);
        deactivate(l - 1);
      }
    }
  }

 private:
  auto ablk(int layer, int block) { return A_[layer].middleRows(block * nr_, nr_); }
  auto zblk(int layer, int block) { return Z_[layer].middleRows(block * nr_, nr_); }

  void activate(int l) {
    const int F = static_cast<int>(plan_.first.size());
    tanh_into(Z_[l].topRows(nr_), A_[l].topRows(nr_));
    auto T = A_[l].topRows(nr_).array();
    for (int k = 0; k < F; ++k)
      ablk(l, 1 + k).array() = (1.0 - T.square()) * zblk(l, 1 + k).array();
    for (std::size_t k = 0; k < plan_.second.size(); ++k) {
      const int fk = plan_.first_pos(plan_.second[k]);
      const int blk = 1 + F + static_cast<int>(k);
      auto dz = zblk(l, 1 + fk).array();
      ablk(l, blk).array() =
          -2.0 * T * (1.0 - T.square()) * dz.square() + (1.0 - T.square()) * zblk(l, blk).array();
    }
  }

  // Transforms adjoints of the layer outputs (adj_a_) into adjoints of the
  // pre-activations (adj_z_), using
  //   a      = tanh(z)
  //   da_c   = phi1 dz_c
  //   d2a_s  = phi2 dz_s^2 + phi1 sz_s
  // with phi1 = 1 - T^2, phi2 = -2 T phi1, phi3 = (6 T^2 - 2) phi1.
  void deactivate(int l) {
    const int w = sizes_[l];
    const int F = static_cast<int>(plan_.first.size());
    const int S = static_cast<int>(plan_.second.size());
    auto cols = [&](Eigen::MatrixXd& mat, int block) {
      return mat.block(block * nr_, 0, nr_, w);
    };
    auto T = A_[l].topRows(nr_).array();
    auto phi1 = [&] { return 1.0 - T.square(); };

    auto zv = cols(adj_z_, 0);
    zv.array() = cols(adj_a_, 0).array() * phi1();
    for (int k = 0; k < F; ++k) {
      auto dz = zblk(l, 1 + k).array();
      zv.array() += cols(adj_a_, 1 + k).array() * (-2.0 * T * phi1()) * dz;
    }
    for (int k = 0; k < S; ++k) {
      const int blk = 1 + F + k;
      auto dz = zblk(l, 1 + plan_.first_pos(plan_.second[k])).array();
      zv.array() += cols(adj_a_, blk).array() *
                    ((6.0 * T.square() - 2.0) * phi1() * dz.square() +
                     (-2.0 * T * phi1()) * zblk(l, blk).array());
    }
    for (int k = 0; k < F; ++k) {
      auto dst = cols(adj_z_, 1 + k);
      dst.array() = cols(adj_a_, 1 + k).array() * phi1();
      const int coord = plan_.first[k];
      for (int s = 0; s < S; ++s)
        if (plan_.second[s] == coord) {
          auto dz = zblk(l, 1 + k).array();
          dst.array() += cols(adj_a_, 1 + F + s).array() * (-4.0 * T * phi1()) * dz;
        }
    }
    for (int k = 0; k < S; ++k)
      cols(adj_z_, 1 + F + k).array() = cols(adj_a_, 1 + F + k).array() * phi1();
  }

  Plan plan_;
  std::vector<int> sizes_;
  int max_rows_ = 0;
  int nr_ = 0;
  std::vector<Eigen::MatrixXd> A_, Z_;
  Eigen::MatrixXd adj_a_, adj_z_;
  Eigen::VectorXd seed_;
};

void validate_term(const LossTerm& t) {
  switch (t.kind) {
    case LossTerm::Kind::value:
      if (t.targets.size() != t.points.size())
        throw ConfigError("loss term: targets must match points");
      break;
    case LossTerm::Kind::pair:
      if (t.partners.size() != t.points.size())
        throw ConfigError("loss term: partners must match points");
      break;
    case LossTerm::Kind::residual:
      if (!t.residual) throw ConfigError("loss term: residual callback missing");
      break;
  }
}

}  // namespace

struct LossEngine::Impl {
  std::vector<LossTerm> terms;
  std::vector<ChunkWork> works;
  std::vector<std::vector<Point>> pair_rows;  // interleaved (point, partner)

  // Mean square of one term; optionally accumulates its weighted gradient.
  double process(const MlpModel& m, std::size_t ti, Eigen::VectorXd* grad) {
    const LossTerm& t = terms[ti];
    if (t.kind == LossTerm::Kind::pair) return process_pair(m, ti, grad);
    ChunkWork& w = works[ti];
    const Plan plan = t.kind == LossTerm::Kind::residual
                          ? make_plan(t.spec, m.input_dim, false)
                          : Plan{m.input_dim, {}, {}};
    const int n = static_cast<int>(t.points.size());
    const int rows = std::min(n, kChunkRows);
    if (!w.matches(m, plan, rows)) w.configure(m, plan, rows);

    const int F = static_cast<int>(plan.first.size());
    double ss = 0.0;
    for (int r0 = 0; r0 < n; r0 += rows) {
      const int nr = std::min(rows, n - r0);
      w.forward(m, t.points.data() + r0, nr);
      if (grad) w.seed().head(plan.chan() * nr).setZero();
      if (t.kind == LossTerm::Kind::residual) {
        for (int i = 0; i < nr; ++i) {
          const Point& x = t.points[r0 + i];
          ResidualSens s = t.residual(x.data(), w.jet(i));
          ss += s.r * s.r;
          if (grad) {
            const double coef = t.weight * 2.0 * s.r / n;
            w.seed()[i] = coef * s.d_u;
            for (int k = 0; k < F; ++k)
              w.seed()[(1 + k) * nr + i] = coef * s.d_du[plan.first[k]];
            for (std::size_t k = 0; k < plan.second.size(); ++k)
              w.seed()[(1 + F + static_cast<int>(k)) * nr + i] = coef * s.d_d2u[plan.second[k]];
          }
        }
      } else {
        for (int i = 0; i < nr; ++i) {
          const double q = w.value(i) - t.targets[r0 + i];
          ss += q * q;
          if (grad) w.seed()[i] = t.weight * 2.0 * q / n;
        }
      }
      if (grad) w.backward(m, *grad);
    }
    return ss / n;
  }

  // Pair rows are interleaved (2i: point, 2i+1: partner) so a pair never
  // straddles a chunk boundary (kChunkRows is even).
  double process_pair(const MlpModel& m, std::size_t ti, Eigen::VectorXd* grad) {
    static_assert(kChunkRows % 2 == 0);
    const LossTerm& t = terms[ti];
    ChunkWork& w = works[ti];
    const Plan plan{m.input_dim, {}, {}};
    const std::vector<Point>& inter = pair_rows[ti];
    const int n = static_cast<int>(t.points.size());
    const int total = 2 * n;
    const int rows = std::min(total, kChunkRows);
    if (!w.matches(m, plan, rows)) w.configure(m, plan, rows);

    double ss = 0.0;
    for (int r0 = 0; r0 < total; r0 += rows) {
      const int nr = std::min(rows, total - r0);
      w.forward(m, inter.data() + r0, nr);
      if (grad) w.seed().head(nr).setZero();
      for (int i = 0; i < nr; i += 2) {
        const double q = w.value(i) - w.value(i + 1);
        ss += q * q;
        if (grad) {
          const double coef = t.weight * 2.0 * q / n;
          w.seed()[i] = coef;
          w.seed()[i + 1] = -coef;
        }
      }
      if (grad) w.backward(m, *grad);
    }
    return ss / n;
  }

  LossValue run(const MlpModel& m, Eigen::VectorXd* grad) {
    if (grad) grad->setZero(m.params.size());
    LossValue out;
    out.terms.resize(terms.size(), 0.0);
    for (std::size_t ti = 0; ti < terms.size(); ++ti) {
      if (terms[ti].weight == 0.0 || terms[ti].points.empty()) continue;
      out.terms[ti] = process(m, ti, grad);
      out.total += terms[ti].weight * out.terms[ti];
    }
    out.finite = std::isfinite(out.total);
    return out;
  }
};

LossEngine::LossEngine() : impl_(new Impl) {}

LossEngine::LossEngine(const MlpModel& model, std::vector<LossTerm> terms) : impl_(new Impl) {
  (void)model;
  for (const LossTerm& t : terms) validate_term(t);
  impl_->terms = std::move(terms);
  impl_->works.resize(impl_->terms.size());
  impl_->pair_rows.resize(impl_->terms.size());
  for (std::size_t ti = 0; ti < impl_->terms.size(); ++ti) {
    const LossTerm& t = impl_->terms[ti];
    if (t.kind != LossTerm::Kind::pair) continue;
    auto& inter = impl_->pair_rows[ti];
    inter.resize(2 * t.points.size());
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      inter[2 * i] = t.points[i];
      inter[2 * i + 1] = t.partners[i];
    }
  }
}

LossEngine::LossEngine(LossEngine&&) noexcept = default;
LossEngine& LossEngine::operator=(LossEngine&&) noexcept = default;
LossEngine::~LossEngine() = default;

const std::vector<LossTerm>& LossEngine::terms() const { return impl_->terms; }

LossValue LossEngine::value(const MlpModel& model) { return impl_->run(model, nullptr); }

LossValue LossEngine::value_and_grad(const MlpModel& model, Eigen::VectorXd& grad) {
  return impl_->run(model, &grad);
}

LossValue loss_value(const MlpModel& model, const std::vector<LossTerm>& terms) {
  LossEngine eng(model, terms);
  return eng.value(model);
}

LossValue loss_gradient(const MlpModel& model, const std::vector<LossTerm>& terms,
                        Eigen::VectorXd& grad) {
  LossEngine eng(model, terms);
  return eng.value_and_grad(model, grad);
}

Jet eval_jet(const MlpModel& model, const Point& x, const DerivativeSpec& spec) {
  const Plan plan = make_plan(spec, model.input_dim, true);
  ChunkWork w;
  w.configure(model, plan, 1);
  w.forward(model, &x, 1);
  return w.jet(0);
}

std::vector<double> eval_values(const MlpModel& model, const std::vector<Point>& pts) {
  std::vector<double> out(pts.size());
  if (pts.empty()) return out;
  ChunkWork w;
  const int rows = std::min<int>(static_cast<int>(pts.size()), kChunkRows);
  w.configure(model, Plan{model.input_dim, {}, {}}, rows);
  for (std::size_t r0 = 0; r0 < pts.size(); r0 += rows) {
    const int nr = std::min<std::size_t>(rows, pts.size() - r0);
    w.forward(model, pts.data() + r0, nr);
    for (int i = 0; i < nr; ++i) out[r0 + i] = w.value(i);
  }
  return out;
}

std::vector<Jet> eval_jets(const MlpModel& model, const std::vector<Point>& pts,
                           const DerivativeSpec& spec) {
  std::vector<Jet> out(pts.size());
  if (pts.empty()) return out;
  const Plan plan = make_plan(spec, model.input_dim, true);
  ChunkWork w;
  const int rows = std::min<int>(static_cast<int>(pts.size()), kChunkRows);
  w.configure(model, plan, rows);
  for (std::size_t r0 = 0; r0 < pts.size(); r0 += rows) {
    const int nr = std::min<std::size_t>(rows, pts.size() - r0);
    w.forward(model, pts.data() + r0, nr);
    for (int i = 0; i < nr; ++i) out[r0 + i] = w.jet(i);
  }
  return out;
}

double fd_check(const MlpModel& model, const Point& x, const DerivativeSpec& spec, double step) {
  if (step <= 0.0) throw ConfigError("fd_check: step must be positive");
  const Jet jet = eval_jet(model, x, spec);
  auto val = [&](const Point& p) { return eval_values(model, {p})[0]; };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };

  const double u0 = val(x);
  double worst = 0.0;
  std::set<int> first(spec.first.begin(), spec.first.end());
  std::set<int> second(spec.second.begin(), spec.second.end());
  for (int c : first) {
    Point xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    const double fd = (val(xp) - val(xm)) / (2.0 * step);
    worst = std::max(worst, rel(jet.du[c], fd));
  }
  for (int c : second) {
    Point xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    const double fd = (val(xp) - 2.0 * u0 + val(xm)) / (step * step);
    worst = std::max(worst, rel(jet.d2u[c], fd));
  }
  return worst;
}

}  // namespace colabel
