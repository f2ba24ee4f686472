#include "efish/policy.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "efish/errors.hpp"

namespace efish {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kLog2 = 0.69314718055994530942;

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 - tanh(u)^2), stable for large |u|.
inline double log_sech2(double u) {
  const double au = std::abs(u);
  return 2.0 * (kLog2 - au - std::log1p(std::exp(-2.0 * au)));
}

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
}

MatrixXd orthogonal(int n, Rng& rng) {
  MatrixXd a(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) a(r, c) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
  const MatrixXd r_mat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < n; ++c)
    if (r_mat(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

}  // namespace

PolicyParams PolicyParams::zeros(int obs_dim, int hidden_dim) {
  PolicyParams p;
  p.obs_dim = obs_dim;
  p.hidden_dim = hidden_dim;
  const int h = hidden_dim;
  const int d = obs_dim;
  p.Wz = MatrixXd::Zero(h, d);
  p.Wr = MatrixXd::Zero(h, d);
  p.Wh = MatrixXd::Zero(h, d);
  p.Uz = MatrixXd::Zero(h, h);
  p.Ur = MatrixXd::Zero(h, h);
  p.Uh = MatrixXd::Zero(h, h);
  p.bz = VectorXd::Zero(h);
  p.br = VectorXd::Zero(h);
  p.bh = VectorXd::Zero(h);
  p.Wa1 = MatrixXd::Zero(h, h);
  p.Wa2 = MatrixXd::Zero(h, h);
  p.Wao = MatrixXd::Zero(kNumHeads, h);
  p.ba1 = VectorXd::Zero(h);
  p.ba2 = VectorXd::Zero(h);
  p.bao = VectorXd::Zero(kNumHeads);
  p.log_std = VectorXd::Zero(kNumGaussianHeads);
  p.Wc1 = MatrixXd::Zero(h, h);
  p.Wc2 = MatrixXd::Zero(h, h);
  p.Wco = MatrixXd::Zero(1, h);
  p.bc1 = VectorXd::Zero(h);
  p.bc2 = VectorXd::Zero(h);
  p.bco = VectorXd::Zero(1);
  return p;
}

PolicyParams PolicyParams::init(int obs_dim, int hidden_dim, Rng& rng) {
  PolicyParams p = zeros(obs_dim, hidden_dim);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(obs_dim));
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  fill_uniform(p.Wz, in_bound, rng);
  fill_uniform(p.Wr, in_bound, rng);
  fill_uniform(p.Wh, in_bound, rng);
  p.Uz = orthogonal(hidden_dim, rng);
  p.Ur = orthogonal(hidden_dim, rng);
  p.Uh = orthogonal(hidden_dim, rng);
  fill_uniform(p.Wa1, h_bound, rng);
  fill_uniform(p.Wa2, h_bound, rng);
  fill_uniform(p.Wao, h_bound, rng);
  p.Wao *= 0.01;  // small initial action logits/means stabilize early PPO
  fill_uniform(p.Wc1, h_bound, rng);
  fill_uniform(p.Wc2, h_bound, rng);
  fill_uniform(p.Wco, h_bound, rng);
  p.log_std.setConstant(-0.5);
  return p;
}

std::vector<TensorRef> PolicyParams::tensors() {
  return {
      {"gru.Wz", &Wz, nullptr},   {"gru.Wr", &Wr, nullptr},
      {"gru.Wh", &Wh, nullptr},   {"gru.Uz", &Uz, nullptr},
      {"gru.Ur", &Ur, nullptr},   {"gru.Uh", &Uh, nullptr},
      {"gru.bz", nullptr, &bz},   {"gru.br", nullptr, &br},
      {"gru.bh", nullptr, &bh},   {"actor.W1", &Wa1, nullptr},
      {"actor.W2", &Wa2, nullptr},{"actor.Wout", &Wao, nullptr},
      {"actor.b1", nullptr, &ba1},{"actor.b2", nullptr, &ba2},
      {"actor.bout", nullptr, &bao},{"actor.log_std", nullptr, &log_std},
      {"critic.W1", &Wc1, nullptr},{"critic.W2", &Wc2, nullptr},
      {"critic.Wout", &Wco, nullptr},{"critic.b1", nullptr, &bc1},
      {"critic.b2", nullptr, &bc2},{"critic.bout", nullptr, &bco},
  };
}

std::vector<TensorRef> PolicyParams::tensors() const {
  return const_cast<PolicyParams*>(this)->tensors();
}

std::size_t PolicyParams::num_params() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.mat ? t.mat->size() : t.vec->size();
  return n;
}

void PolicyParams::set_zero() {
  for (auto& t : tensors()) {
    if (t.mat) t.mat->setZero();
    else t.vec->setZero();
  }
}

bool PolicyParams::all_finite() const {
  for (const auto& t : tensors()) {
    if (t.mat && !t.mat->allFinite()) return false;
    if (t.vec && !t.vec->allFinite()) return false;
  }
  return true;
}

void axpy(PolicyParams& y, const PolicyParams& x, double alpha) {
  auto ty = y.tensors();
  auto tx = x.tensors();
  for (std::size_t i = 0; i < ty.size(); ++i) {
    if (ty[i].mat) *ty[i].mat += alpha * *tx[i].mat;
    else *ty[i].vec += alpha * *tx[i].vec;
  }
}

void scale(PolicyParams& x, double alpha) {
  for (auto& t : x.tensors()) {
    if (t.mat) *t.mat *= alpha;
    else *t.vec *= alpha;
  }
}

double global_norm(const PolicyParams& x) {
  double ss = 0.0;
  for (const auto& t : x.tensors())
    ss += t.mat ? t.mat->squaredNorm() : t.vec->squaredNorm();
  return std::sqrt(ss);
}

ForwardResult policy_forward(const PolicyParams& p, const MatrixXd& x,
                             const MatrixXd& h, StepCache* cache) {
  if (x.rows() != p.obs_dim || h.rows() != p.hidden_dim || x.cols() != h.cols())
    throw ContractError("policy_forward: dimension mismatch");
  if (!x.allFinite() || !h.allFinite())
    throw ContractError("policy_forward: non-finite input");

  auto sigm = [](MatrixXd m) {
    return (1.0 / (1.0 + (-m.array()).exp())).matrix();
  };
  const MatrixXd zg = sigm(((p.Wz * x + p.Uz * h).colwise() + p.bz));
  const MatrixXd rg = sigm(((p.Wr * x + p.Ur * h).colwise() + p.br));
  const MatrixXd rh = rg.cwiseProduct(h);
  const MatrixXd cg = ((p.Wh * x + p.Uh * rh).colwise() + p.bh).array().tanh().matrix();
  const MatrixXd h1 = (1.0 - zg.array()).matrix().cwiseProduct(h) + zg.cwiseProduct(cg);

  const MatrixXd a1 = ((p.Wa1 * h1).colwise() + p.ba1).array().tanh().matrix();
  const MatrixXd a2 = ((p.Wa2 * a1).colwise() + p.ba2).array().tanh().matrix();
  const MatrixXd heads = (p.Wao * a2).colwise() + p.bao;

  const MatrixXd v1 = ((p.Wc1 * h1).colwise() + p.bc1).array().tanh().matrix();
  const MatrixXd v2 = ((p.Wc2 * v1).colwise() + p.bc2).array().tanh().matrix();
  const RowVectorXd value = ((p.Wco * v2).colwise() + p.bco).row(0);

  if (cache) {
    cache->h_prev = h;
    cache->x = x;
    cache->z = zg;
    cache->r = rg;
    cache->c = cg;
    cache->h = h1;
    cache->a1 = a1;
    cache->a2 = a2;
    cache->heads = heads;
    cache->v1 = v1;
    cache->v2 = v2;
    cache->value = value;
  }
  return {heads, value, h1};
}

VectorXd gru_step(const PolicyParams& p, const VectorXd& x, const VectorXd& h) {
  return policy_forward(p, x, h).h.col(0);
}

double bernoulli_logprob(double logit, bool taken) {
  return taken ? -softplus(-logit) : -softplus(logit);
}

double bernoulli_entropy(double logit) {
  const double prob = sigmoid(logit);
  return prob * softplus(-logit) + (1.0 - prob) * softplus(logit);
}

double heads_logprob(const Eigen::Vector4d& heads, const VectorXd& log_std,
                     const Eigen::Vector2d& u, bool eod, bool bite) {
  double lp = 0.0;
  for (int k = 0; k < kNumGaussianHeads; ++k) {
    const double mu = heads[k];
    const double ls = log_std[k];
    const double zscore = (u[k] - mu) * std::exp(-ls);
    lp += -0.5 * zscore * zscore - ls - 0.5 * kLog2Pi;
    lp -= log_sech2(u[k]);  // tanh change of variables
  }
  lp -= std::log(0.5);  // thrust squash is 0.5*(tanh(u)+1): extra |da/du| factor
  lp += bernoulli_logprob(heads[kHeadEodLogit], eod);
  lp += bernoulli_logprob(heads[kHeadBiteLogit], bite);
  return lp;
}

double heads_entropy(const Eigen::Vector4d& heads, const VectorXd& log_std) {
  // Pre-squash Gaussian entropies (the exact squashed entropy has no
  // closed form) plus exact Bernoulli entropies.
  double h = 0.0;
  for (int k = 0; k < kNumGaussianHeads; ++k)
    h += log_std[k] + 0.5 * (1.0 + kLog2Pi);
  h += bernoulli_entropy(heads[kHeadEodLogit]);
  h += bernoulli_entropy(heads[kHeadBiteLogit]);
  return h;
}

ActionSample sample_actions(const Eigen::Vector4d& heads, const VectorXd& log_std,
                            Rng& rng) {
  ActionSample s;
  s.u[0] = heads[kHeadThrustMu] + std::exp(log_std[0]) * rng.normal();
  s.u[1] = heads[kHeadTurnMu] + std::exp(log_std[1]) * rng.normal();
  s.cmd.thrust = 0.5 * (std::tanh(s.u[0]) + 1.0);
  s.cmd.turn = std::tanh(s.u[1]);
  s.cmd.eod = rng.bernoulli(sigmoid(heads[kHeadEodLogit]));
  s.cmd.bite = rng.bernoulli(sigmoid(heads[kHeadBiteLogit]));
  s.logprob = heads_logprob(heads, log_std, s.u, s.cmd.eod, s.cmd.bite);
  return s;
}

ActionCommand mode_actions(const Eigen::Vector4d& heads) {
  ActionCommand cmd;
  cmd.thrust = 0.5 * (std::tanh(heads[kHeadThrustMu]) + 1.0);
  cmd.turn = std::tanh(heads[kHeadTurnMu]);
  cmd.eod = heads[kHeadEodLogit] > 0.0;
  cmd.bite = heads[kHeadBiteLogit] > 0.0;
  return cmd;
}

EvalResult evaluate_sequence(const PolicyParams& p, const SequenceBatch& batch) {
  const int T = batch.T();
  const int B = static_cast<int>(batch.h0.cols());
  if (static_cast<int>(batch.u.size()) != T || static_cast<int>(batch.bits.size()) != T ||
      static_cast<int>(batch.done.size()) != T)
    throw ContractError("evaluate_sequence: misaligned sequence lengths");

  EvalResult out;
  out.logp.resize(T, B);
  out.value.resize(T, B);
  out.entropy.resize(T, B);
  out.caches.resize(T);

  MatrixXd h = batch.h0;
  for (int t = 0; t < T; ++t) {
    const auto fwd = policy_forward(p, batch.x[t], h, &out.caches[t]);
    for (int b = 0; b < B; ++b) {
      const Eigen::Vector4d heads = fwd.heads.col(b);
      const Eigen::Vector2d u = batch.u[t].col(b);
      const bool eod = batch.bits[t](0, b) > 0.5;
      const bool bite = batch.bits[t](1, b) > 0.5;
      out.logp(t, b) = heads_logprob(heads, p.log_std, u, eod, bite);
      out.entropy(t, b) = heads_entropy(heads, p.log_std);
      out.value(t, b) = fwd.value[b];
    }
    // Episode boundaries: zero the hidden state entering the next step.
    h = fwd.h;
    for (int b = 0; b < B; ++b)
      if (batch.done[t][b] > 0.5) h.col(b).setZero();
  }
  return out;
}

void backward_sequence(const PolicyParams& p, const SequenceBatch& batch,
                       const EvalResult& eval, const MatrixXd& dlogp,
                       const MatrixXd& dvalue, const MatrixXd& dentropy,
                       PolicyParams& grads) {
  const int T = batch.T();
  const int B = static_cast<int>(batch.h0.cols());
  MatrixXd dh_next = MatrixXd::Zero(p.hidden_dim, B);  // carry into step t's output

  for (int t = T - 1; t >= 0; --t) {
    const StepCache& cc = eval.caches[t];
    // The carry was computed w.r.t. the (possibly reset) input of step t+1;
    // a reset cuts the path, so mask those columns.
    for (int b = 0; b < B; ++b)
      if (batch.done[t][b] > 0.5) dh_next.col(b).setZero();

    // Head-level gradients.
    MatrixXd dheads = MatrixXd::Zero(kNumHeads, B);
    RowVectorXd dval = dvalue.row(t);
    for (int b = 0; b < B; ++b) {
      const double wlp = dlogp(t, b);
      const double wh = dentropy(t, b);
      for (int k = 0; k < kNumGaussianHeads; ++k) {
        const double inv_var = std::exp(-2.0 * p.log_std[k]);
        const double diff = batch.u[t](k, b) - cc.heads(k, b);
        dheads(k, b) += wlp * diff * inv_var;
        // d logp / d log_std = diff^2/var - 1; d entropy / d log_std = 1.
        grads.log_std[k] += wlp * (diff * diff * inv_var - 1.0) + wh;
      }
      for (int k = 0; k < 2; ++k) {
        const int row = kHeadEodLogit + k;
        const double logit = cc.heads(row, b);
        const double prob = sigmoid(logit);
        const double taken = batch.bits[t](k, b) > 0.5 ? 1.0 : 0.0;
        dheads(row, b) += wlp * (taken - prob);
        dheads(row, b) += wh * (-logit * prob * (1.0 - prob));
      }
    }

    // Actor MLP backward.
    grads.Wao += dheads * cc.a2.transpose();
    grads.bao += dheads.rowwise().sum();
    MatrixXd da2 = (p.Wao.transpose() * dheads).cwiseProduct(
        (1.0 - cc.a2.array().square()).matrix());
    grads.Wa2 += da2 * cc.a1.transpose();
    grads.ba2 += da2.rowwise().sum();
    MatrixXd da1 = (p.Wa2.transpose() * da2).cwiseProduct(
        (1.0 - cc.a1.array().square()).matrix());
    grads.Wa1 += da1 * cc.h.transpose();
    grads.ba1 += da1.rowwise().sum();
    MatrixXd dh = p.Wa1.transpose() * da1;

    // Critic MLP backward.
    grads.Wco += dval * cc.v2.transpose();
    grads.bco[0] += dval.sum();
    MatrixXd dv2 = (p.Wco.transpose() * dval).cwiseProduct(
        (1.0 - cc.v2.array().square()).matrix());
    grads.Wc2 += dv2 * cc.v1.transpose();
    grads.bc2 += dv2.rowwise().sum();
    MatrixXd dv1 = (p.Wc2.transpose() * dv2).cwiseProduct(
        (1.0 - cc.v1.array().square()).matrix());
    grads.Wc1 += dv1 * cc.h.transpose();
    grads.bc1 += dv1.rowwise().sum();
    dh += p.Wc1.transpose() * dv1;

    dh += dh_next;

    // GRU backward: h = (1-z).h_prev + z.c
    const MatrixXd dz = dh.cwiseProduct(cc.c - cc.h_prev);
    const MatrixXd dc = dh.cwiseProduct(cc.z);
    MatrixXd dh_prev = dh.cwiseProduct((1.0 - cc.z.array()).matrix());

    const MatrixXd dc_pre = dc.cwiseProduct((1.0 - cc.c.array().square()).matrix());
    grads.Wh += dc_pre * cc.x.transpose();
    const MatrixXd rh = cc.r.cwiseProduct(cc.h_prev);
    grads.Uh += dc_pre * rh.transpose();
    grads.bh += dc_pre.rowwise().sum();
    const MatrixXd drh = p.Uh.transpose() * dc_pre;
    const MatrixXd dr = drh.cwiseProduct(cc.h_prev);
    dh_prev += drh.cwiseProduct(cc.r);

    const MatrixXd dz_pre =
        dz.cwiseProduct(cc.z.cwiseProduct((1.0 - cc.z.array()).matrix()));
    grads.Wz += dz_pre * cc.x.transpose();
    grads.Uz += dz_pre * cc.h_prev.transpose();
    grads.bz += dz_pre.rowwise().sum();
    dh_prev += p.Uz.transpose() * dz_pre;

    const MatrixXd dr_pre =
        dr.cwiseProduct(cc.r.cwiseProduct((1.0 - cc.r.array()).matrix()));
    grads.Wr += dr_pre * cc.x.transpose();
    grads.Ur += dr_pre * cc.h_prev.transpose();
    grads.br += dr_pre.rowwise().sum();
    dh_prev += p.Ur.transpose() * dr_pre;

    dh_next = dh_prev;
  }
}

}  // namespace efish
