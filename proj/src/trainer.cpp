#include "efish/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "efish/checkpoint.hpp"
#include "efish/errors.hpp"
#include "efish/io_util.hpp"

namespace efish {

namespace {
constexpr char kResumeMagic[4] = {'E', 'F', 'R', 'S'};
constexpr std::uint32_t kResumeVersion = 1;
constexpr std::size_t kFoodWindow = 40;  // completed episodes kept for metrics

void put_matrix(std::ostream& os, const MatrixXd& m) {
  io::put_u32(os, static_cast<std::uint32_t>(m.rows()));
  io::put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) io::put_f64(os, m(r, c));
}

MatrixXd get_matrix(std::istream& is) {
  const auto rows = static_cast<Eigen::Index>(io::get_u32(is));
  const auto cols = static_cast<Eigen::Index>(io::get_u32(is));
  MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = io::get_f64(is);
  return m;
}

void put_params(std::ostream& os, const PolicyParams& p) {
  for (const auto& t : p.tensors()) {
    if (t.mat) {
      put_matrix(os, *t.mat);
    } else {
      io::put_u32(os, static_cast<std::uint32_t>(t.vec->size()));
      io::put_u32(os, 1);
      for (Eigen::Index i = 0; i < t.vec->size(); ++i) io::put_f64(os, (*t.vec)[i]);
    }
  }
}

void get_params(std::istream& is, PolicyParams& p) {
  for (auto& t : p.tensors()) {
    const MatrixXd m = get_matrix(is);
    if (t.mat) {
      if (m.rows() != t.mat->rows() || m.cols() != t.mat->cols())
        throw IoError("resume bundle: parameter shape mismatch at " + t.name);
      *t.mat = m;
    } else {
      if (m.rows() != t.vec->size() || m.cols() != 1)
        throw IoError("resume bundle: parameter shape mismatch at " + t.name);
      *t.vec = m.col(0);
    }
  }
}

void put_rng(std::ostream& os, const Rng& rng) {
  for (std::uint64_t w : rng.state()) io::put_u64(os, w);
}

void get_rng(std::istream& is, Rng& rng) {
  std::array<std::uint64_t, 4> s;
  for (auto& w : s) w = io::get_u64(is);
  rng.set_state(s);
}

void put_world(std::ostream& os, const WorldState& w) {
  io::put_i64(os, w.t);
  io::put_u32(os, static_cast<std::uint32_t>(w.agents.size()));
  for (const auto& a : w.agents) {
    io::put_u32(os, static_cast<std::uint32_t>(a.id));
    io::put_f64(os, a.pos.x);
    io::put_f64(os, a.pos.y);
    io::put_f64(os, a.heading);
    io::put_f64(os, a.speed);
    io::put_f64(os, a.dominance);
    io::put_u32(os, static_cast<std::uint32_t>(a.food_eaten));
    io::put_u8(os, a.eod_now ? 1 : 0);
    io::put_u8(os, a.bite_now ? 1 : 0);
    io::put_u8(os, a.alive ? 1 : 0);
    io::put_u32(os, static_cast<std::uint32_t>(a.hidden_ref));
    io::put_u32(os, static_cast<std::uint32_t>(a.ampullary_ema.size()));
    for (Eigen::Index i = 0; i < a.ampullary_ema.size(); ++i)
      io::put_f64(os, a.ampullary_ema[i]);
  }
  io::put_u32(os, static_cast<std::uint32_t>(w.food.size()));
  for (const auto& f : w.food) {
    io::put_f64(os, f.pos.x);
    io::put_f64(os, f.pos.y);
    io::put_f64(os, f.radius_m);
    io::put_f64(os, f.polarizability);
    io::put_u8(os, f.active ? 1 : 0);
    io::put_u32(os, static_cast<std::uint32_t>(f.patch_id));
  }
  put_rng(os, w.rng);
}

void get_world(std::istream& is, WorldState& w) {
  w.t = io::get_i64(is);
  w.agents.resize(io::get_u32(is));
  for (auto& a : w.agents) {
    a.id = static_cast<int>(io::get_u32(is));
    a.pos.x = io::get_f64(is);
    a.pos.y = io::get_f64(is);
    a.heading = io::get_f64(is);
    a.speed = io::get_f64(is);
    a.dominance = io::get_f64(is);
    a.food_eaten = static_cast<int>(io::get_u32(is));
    a.eod_now = io::get_u8(is) != 0;
    a.bite_now = io::get_u8(is) != 0;
    a.alive = io::get_u8(is) != 0;
    a.hidden_ref = static_cast<int>(io::get_u32(is));
    a.ampullary_ema.resize(io::get_u32(is));
    for (Eigen::Index i = 0; i < a.ampullary_ema.size(); ++i)
      a.ampullary_ema[i] = io::get_f64(is);
  }
  w.food.resize(io::get_u32(is));
  for (auto& f : w.food) {
    f.pos.x = io::get_f64(is);
    f.pos.y = io::get_f64(is);
    f.radius_m = io::get_f64(is);
    f.polarizability = io::get_f64(is);
    f.active = io::get_u8(is) != 0;
    f.patch_id = static_cast<int>(io::get_u32(is));
  }
  get_rng(is, w.rng);
}
}  // namespace

GaeResult compute_gae(const MatrixXd& rewards, const MatrixXd& values,
                      const MatrixXd& dones, const RowVectorXd& bootstrap,
                      double gamma, double lambda) {
  const Eigen::Index T = rewards.rows();
  const Eigen::Index B = rewards.cols();
  GaeResult out;
  out.advantages.setZero(T, B);
  out.returns.setZero(T, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    double carry = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const double not_done = 1.0 - dones(t, b);
      const double v_next = (t + 1 < T) ? values(t + 1, b) : bootstrap[b];
      const double delta = rewards(t, b) + gamma * v_next * not_done - values(t, b);
      carry = delta + gamma * lambda * not_done * carry;
      out.advantages(t, b) = carry;
      out.returns(t, b) = carry + values(t, b);
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<int>& dones, double bootstrap, double gamma, double lambda) {
  const auto T = static_cast<Eigen::Index>(rewards.size());
  MatrixXd r(T, 1), v(T, 1), d(T, 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    r(t, 0) = rewards[t];
    v(t, 0) = values[t];
    d(t, 0) = dones[t] ? 1.0 : 0.0;
  }
  RowVectorXd boot(1);
  boot[0] = bootstrap;
  const GaeResult res = compute_gae(r, v, d, boot, gamma, lambda);
  std::vector<double> adv(T), ret(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    adv[t] = res.advantages(t, 0);
    ret[t] = res.returns(t, 0);
  }
  return {adv, ret};
}

void Adam::init_like(const PolicyParams& params) {
  m = PolicyParams::zeros(params.obs_dim, params.hidden_dim);
  v = PolicyParams::zeros(params.obs_dim, params.hidden_dim);
  t = 0;
}

void Adam::step(PolicyParams& params, const PolicyParams& grads) {
  t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  auto tp = params.tensors();
  auto tg = grads.tensors();
  auto tm = m.tensors();
  auto tv = v.tensors();
  for (std::size_t i = 0; i < tp.size(); ++i) {
    auto update = [&](auto& p, const auto& g, auto& mm, auto& vv) {
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = (beta2 * vv.array() + (1.0 - beta2) * g.array().square()).matrix();
      p -= (lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + eps)).matrix();
    };
    if (tp[i].mat) update(*tp[i].mat, *tg[i].mat, *tm[i].mat, *tv[i].mat);
    else update(*tp[i].vec, *tg[i].vec, *tm[i].vec, *tv[i].vec);
  }
}

Trainer::Trainer(const ExperimentConfig& cfg)
    : cfg_(cfg), layout_(ObservationLayout::from(cfg.sensors)) {
  const int n_envs = cfg_.training.n_envs;
  const int n_agents = cfg_.arena.n_agents;
  const int B = n_envs * n_agents;
  const int D = layout_.obs_dim();
  const int H = cfg_.policy.hidden_dim;

  Rng init_rng;
  init_rng.reseed(derive_seed(cfg_.seed, 0x696e6974 /* "init" */), 0);
  params_ = PolicyParams::init(D, H, init_rng);
  adam_.lr = cfg_.training.learning_rate;
  adam_.init_like(params_);
  sample_rng_.reseed(derive_seed(cfg_.seed, 0x73616d70 /* "samp" */), 0);
  reseed_rng_.reseed(derive_seed(cfg_.seed, 0x72657365 /* "rese" */), 0);

  envs_.reserve(n_envs);
  obs_.resize(D, B);
  for (int e = 0; e < n_envs; ++e) {
    envs_.emplace_back(cfg_);
    const auto obs0 = envs_[e].reset(derive_seed(cfg_.seed, 1000 + e));
    for (int a = 0; a < n_agents; ++a) obs_.col(e * n_agents + a) = obs0[a];
  }
  hidden_ = MatrixXd::Zero(H, B);
  ep_food_.assign(n_envs, 0.0);
}

RolloutBuffer Trainer::collect_rollout() {
  const int T = cfg_.training.rollout_steps;
  const int n_envs = cfg_.training.n_envs;
  const int n_agents = cfg_.arena.n_agents;
  const int B = n_envs * n_agents;

  RolloutBuffer buf;
  buf.T = T;
  buf.n_envs = n_envs;
  buf.n_agents = n_agents;
  buf.obs_dim = layout_.obs_dim();
  buf.hidden_dim = cfg_.policy.hidden_dim;
  buf.obs.resize(T);
  buf.u.resize(T);
  buf.bits.resize(T);
  buf.h_in.resize(T);
  buf.logp.resize(T, B);
  buf.value.resize(T, B);
  buf.reward.resize(T, B);
  buf.done.resize(T, B);

  std::vector<ActionCommand> actions(n_agents);
  for (int t = 0; t < T; ++t) {
    buf.h_in[t] = hidden_;
    buf.obs[t] = obs_;
    const auto fwd = policy_forward(params_, obs_, hidden_);
    hidden_ = fwd.h;
    buf.u[t].resize(2, B);
    buf.bits[t].resize(2, B);

    std::vector<std::vector<ActionCommand>> per_env(n_envs,
                                                    std::vector<ActionCommand>(n_agents));
    for (int b = 0; b < B; ++b) {
      const auto s = sample_actions(fwd.heads.col(b), params_.log_std, sample_rng_);
      per_env[b / n_agents][b % n_agents] = s.cmd;
      buf.u[t].col(b) = s.u;
      buf.bits[t](0, b) = s.cmd.eod ? 1.0 : 0.0;
      buf.bits[t](1, b) = s.cmd.bite ? 1.0 : 0.0;
      buf.logp(t, b) = s.logprob;
      buf.value(t, b) = fwd.value[b];
    }

    for (int e = 0; e < n_envs; ++e) {
      auto res = envs_[e].step(per_env[e]);
      double food_now = 0.0;
      for (int a = 0; a < n_agents; ++a) {
        const int b = e * n_agents + a;
        buf.reward(t, b) = res.rewards[a];
        buf.done(t, b) = res.done ? 1.0 : 0.0;
        food_now += static_cast<double>(res.events.food_eaten[a].size());
      }
      ep_food_[e] += food_now;
      if (res.done) {
        completed_food_.push_back(ep_food_[e] / n_agents);
        if (completed_food_.size() > kFoodWindow) completed_food_.pop_front();
        ep_food_[e] = 0.0;
        const auto obs0 = envs_[e].reset(reseed_rng_.next_u64());
        for (int a = 0; a < n_agents; ++a) {
          const int b = e * n_agents + a;
          obs_.col(b) = obs0[a];
          hidden_.col(b).setZero();
        }
      } else {
        for (int a = 0; a < n_agents; ++a) obs_.col(e * n_agents + a) = res.obs[a];
      }
    }
  }
  const auto fwd = policy_forward(params_, obs_, hidden_);
  buf.bootstrap = fwd.value;
  return buf;
}

UpdateStats Trainer::ppo_update(const RolloutBuffer& buf) {
  const auto& tc = cfg_.training;
  const int T = buf.T;
  const int B = buf.B();
  const int L = tc.seg_len;
  if (T % L != 0) throw ContractError("ppo_update: seg_len must divide rollout_steps");
  const int S = T / L;  // segments per column

  const GaeResult gae =
      compute_gae(buf.reward, buf.value, buf.done, buf.bootstrap, tc.gamma, tc.gae_lambda);
  MatrixXd adv = gae.advantages;
  const double mean = adv.mean();
  const double stddev = std::sqrt((adv.array() - mean).square().mean());
  adv = ((adv.array() - mean) / (stddev + 1e-8)).matrix();

  UpdateStats stats;
  int n_batches = 0;
  std::vector<std::pair<int, int>> ids;  // (column, segment)
  ids.reserve(static_cast<std::size_t>(B) * S);
  for (int b = 0; b < B; ++b)
    for (int s = 0; s < S; ++s) ids.emplace_back(b, s);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    // Fisher-Yates with our own RNG: std::shuffle is implementation-defined.
    for (std::size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[sample_rng_.uniform_int(i)]);

    const int n_mb = tc.n_minibatches;
    for (int mb = 0; mb < n_mb; ++mb) {
      const std::size_t lo = ids.size() * mb / n_mb;
      const std::size_t hi = ids.size() * (mb + 1) / n_mb;
      const int K = static_cast<int>(hi - lo);
      if (K == 0) continue;

      SequenceBatch batch;
      batch.x.assign(L, MatrixXd(buf.obs_dim, K));
      batch.u.assign(L, MatrixXd(2, K));
      batch.bits.assign(L, MatrixXd(2, K));
      batch.done.assign(L, RowVectorXd(K));
      batch.h0.resize(buf.hidden_dim, K);
      MatrixXd old_logp(L, K), madv(L, K), mret(L, K);
      for (int k = 0; k < K; ++k) {
        const auto [b, s] = ids[lo + k];
        batch.h0.col(k) = buf.h_in[s * L].col(b);
        for (int t = 0; t < L; ++t) {
          const int row = s * L + t;
          batch.x[t].col(k) = buf.obs[row].col(b);
          batch.u[t].col(k) = buf.u[row].col(b);
          batch.bits[t].col(k) = buf.bits[row].col(b);
          batch.done[t][k] = buf.done(row, b);
          old_logp(t, k) = buf.logp(row, b);
          madv(t, k) = adv(row, b);
          mret(t, k) = gae.returns(row, b);
        }
      }

      const EvalResult eval = evaluate_sequence(params_, batch);
      const double N = static_cast<double>(L) * K;
      const MatrixXd ratio = (eval.logp - old_logp).array().exp().matrix();
      const MatrixXd surr1 = ratio.cwiseProduct(madv);
      const MatrixXd clipped = ratio.array()
                                   .min(1.0 + tc.clip_eps)
                                   .max(1.0 - tc.clip_eps)
                                   .matrix();
      const MatrixXd surr2 = clipped.cwiseProduct(madv);
      const double policy_loss = -surr1.cwiseMin(surr2).mean();
      const MatrixXd verr = eval.value - mret;
      const double value_loss = 0.5 * verr.array().square().mean();
      const double entropy = eval.entropy.mean();
      const double loss = policy_loss + tc.value_coef * value_loss - tc.entropy_coef * entropy;

      if (!std::isfinite(loss)) {
        stats.aborted = true;
        stats.note = "non-finite loss at epoch " + std::to_string(epoch) +
                     " minibatch " + std::to_string(mb);
        return stats;
      }

      MatrixXd dlogp(L, K), dvalue(L, K), dentropy(L, K);
      for (int t = 0; t < L; ++t)
        for (int k = 0; k < K; ++k) {
          const bool unclipped_active = surr1(t, k) <= surr2(t, k);
          dlogp(t, k) = unclipped_active ? -ratio(t, k) * madv(t, k) / N : 0.0;
          dvalue(t, k) = tc.value_coef * verr(t, k) / N;
          dentropy(t, k) = -tc.entropy_coef / N;
        }

      PolicyParams grads = PolicyParams::zeros(params_.obs_dim, params_.hidden_dim);
      backward_sequence(params_, batch, eval, dlogp, dvalue, dentropy, grads);
      if (!grads.all_finite()) {
        stats.aborted = true;
        stats.note = "non-finite gradient at epoch " + std::to_string(epoch) +
                     " minibatch " + std::to_string(mb);
        return stats;
      }
      double gnorm = global_norm(grads);
      if (gnorm > tc.max_grad_norm && gnorm > 0.0)
        scale(grads, tc.max_grad_norm / gnorm);
      adam_.step(params_, grads);

      stats.policy_loss += policy_loss;
      stats.value_loss += value_loss;
      stats.entropy += entropy;
      stats.clip_fraction +=
          ((ratio.array() - 1.0).abs() > tc.clip_eps).cast<double>().mean();
      stats.approx_kl += (old_logp - eval.logp).mean();
      stats.grad_norm += gnorm;
      n_batches += 1;
    }
  }
  if (n_batches > 0) {
    stats.policy_loss /= n_batches;
    stats.value_loss /= n_batches;
    stats.entropy /= n_batches;
    stats.clip_fraction /= n_batches;
    stats.approx_kl /= n_batches;
    stats.grad_norm /= n_batches;
  }
  return stats;
}

double Trainer::food_per_episode() const {
  if (completed_food_.empty()) return 0.0;
  return std::accumulate(completed_food_.begin(), completed_food_.end(), 0.0) /
         static_cast<double>(completed_food_.size());
}

void Trainer::write_metrics_row(const RolloutBuffer& buf, const UpdateStats& stats,
                                std::ostream& os) const {
  double eod_rate = 0.0;
  for (const auto& bits : buf.bits) eod_rate += bits.row(0).mean();
  eod_rate /= buf.bits.empty() ? 1.0 : static_cast<double>(buf.bits.size());
  os << update_index_ << '\t' << env_steps_ << '\t' << std::setprecision(12)
     << buf.reward.mean() << '\t' << eod_rate << '\t' << food_per_episode() << '\t'
     << stats.policy_loss << '\t' << stats.value_loss << '\t' << stats.entropy << '\t'
     << stats.clip_fraction << '\t' << stats.approx_kl << '\t' << stats.grad_norm
     << '\t' << (stats.aborted ? 1 : 0) << '\n';
}

void Trainer::save_policy_checkpoint(const std::string& path) const {
  CheckpointMeta meta;
  meta.obs_dim = layout_.obs_dim();
  meta.hidden_dim = cfg_.policy.hidden_dim;
  meta.n_mormyromast = layout_.n_mormyromast;
  meta.n_ampullary = layout_.n_ampullary;
  meta.n_knollenorgan = layout_.n_knollenorgan;
  meta.config_hash = cfg_.config_hash;
  meta.env_steps = env_steps_;
  meta.update_index = update_index_;
  save_checkpoint(path, params_, meta);
}

void Trainer::save_resume_bundle(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open resume bundle for writing: " + path);
  os.write(kResumeMagic, 4);
  io::put_u32(os, kResumeVersion);
  io::put_i64(os, update_index_);
  io::put_i64(os, env_steps_);
  put_params(os, params_);
  io::put_i64(os, adam_.t);
  put_params(os, adam_.m);
  put_params(os, adam_.v);
  put_rng(os, sample_rng_);
  put_rng(os, reseed_rng_);
  put_matrix(os, hidden_);
  put_matrix(os, obs_);
  io::put_u32(os, static_cast<std::uint32_t>(envs_.size()));
  for (const auto& env : envs_) put_world(os, env.state());
  io::put_u32(os, static_cast<std::uint32_t>(ep_food_.size()));
  for (double f : ep_food_) io::put_f64(os, f);
  io::put_u32(os, static_cast<std::uint32_t>(completed_food_.size()));
  for (double f : completed_food_) io::put_f64(os, f);
  if (!os) throw IoError("write failure on resume bundle: " + path);
}

void Trainer::load_resume_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open resume bundle: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kResumeMagic, 4) != 0)
    throw IoError("not a resume bundle: " + path);
  if (io::get_u32(is) != kResumeVersion)
    throw IoError("unsupported resume bundle version in " + path);
  update_index_ = io::get_i64(is);
  env_steps_ = io::get_i64(is);
  get_params(is, params_);
  adam_.t = io::get_i64(is);
  get_params(is, adam_.m);
  get_params(is, adam_.v);
  get_rng(is, sample_rng_);
  get_rng(is, reseed_rng_);
  hidden_ = get_matrix(is);
  obs_ = get_matrix(is);
  const std::uint32_t n_envs = io::get_u32(is);
  if (n_envs != envs_.size())
    throw IoError("resume bundle env count mismatch in " + path);
  for (auto& env : envs_) get_world(is, env.mutable_state());
  ep_food_.resize(io::get_u32(is));
  for (double& f : ep_food_) f = io::get_f64(is);
  completed_food_.resize(io::get_u32(is));
  for (double& f : completed_food_) f = io::get_f64(is);
}

void Trainer::train() {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.output_dir);
  const std::string resume_path = cfg_.output_dir + "/resume_latest.bin";
  const std::string metrics_path = cfg_.output_dir + "/metrics.tsv";
  const bool resuming = fs::exists(resume_path);
  if (resuming) load_resume_bundle(resume_path);

  std::ofstream metrics(metrics_path, resuming ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot open metrics log: " + metrics_path);
  if (!resuming)
    metrics << "update\tenv_steps\tmean_reward\teod_rate\tfood_per_episode\t"
               "policy_loss\tvalue_loss\tentropy\tclip_fraction\tapprox_kl\t"
               "grad_norm\taborted\n";

  const std::int64_t steps_per_update =
      static_cast<std::int64_t>(cfg_.training.n_envs) * cfg_.training.rollout_steps;
  while (env_steps_ < cfg_.training.total_env_steps) {
    const RolloutBuffer buf = collect_rollout();
    const UpdateStats stats = ppo_update(buf);
    env_steps_ += steps_per_update;
    update_index_ += 1;
    write_metrics_row(buf, stats, metrics);
    metrics.flush();
    if (update_index_ % cfg_.training.checkpoint_interval == 0) {
      save_policy_checkpoint(cfg_.output_dir + "/checkpoint_latest.ckpt");
      save_resume_bundle(resume_path);
    }
  }
  save_policy_checkpoint(cfg_.output_dir + "/checkpoint_final.ckpt");
  save_resume_bundle(resume_path);
}

}  // namespace efish
