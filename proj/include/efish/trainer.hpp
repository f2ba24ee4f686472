#ifndef EFISH_TRAINER_HPP_
#define EFISH_TRAINER_HPP_

#include <deque>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "efish/config.hpp"
#include "efish/env.hpp"
#include "efish/policy.hpp"

namespace efish {

// delta_t = r_t + gamma*v_{t+1}*(1-done_t) - v_t
// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1};  returns = A + v.
struct GaeResult {
  MatrixXd advantages;  // T x B
  MatrixXd returns;
};

GaeResult compute_gae(const MatrixXd& rewards, const MatrixXd& values,
                      const MatrixXd& dones, const RowVectorXd& bootstrap,
                      double gamma, double lambda);

// Single-sequence convenience used by tests and small tools.
std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<int>& dones, double bootstrap, double gamma, double lambda);

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  PolicyParams m, v;

  void init_like(const PolicyParams& params);
  void step(PolicyParams& params, const PolicyParams& grads);
};

// T steps of B = n_envs * n_agents columns (column = env * n_agents + agent).
// h_in stores the hidden state entering each step so any segment length L
// dividing T can rebuild exact training conditions.
struct RolloutBuffer {
  int T = 0, n_envs = 0, n_agents = 0, obs_dim = 0, hidden_dim = 0;
  std::vector<MatrixXd> obs;   // T of D x B
  std::vector<MatrixXd> u;     // T of 2 x B
  std::vector<MatrixXd> bits;  // T of 2 x B
  std::vector<MatrixXd> h_in;  // T of H x B
  MatrixXd logp, value, reward, done;  // T x B
  RowVectorXd bootstrap;               // 1 x B

  int B() const { return n_envs * n_agents; }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  bool aborted = false;
  std::string note;
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  // Full training loop: alternates rollouts and updates until
  // total_env_steps, appending metrics rows and saving checkpoints. Resumes
  // from <output_dir>/resume_latest.bin when present.
  void train();

  RolloutBuffer collect_rollout();
  UpdateStats ppo_update(const RolloutBuffer& buf);

  const PolicyParams& params() const { return params_; }
  PolicyParams& mutable_params() { return params_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t update_index() const { return update_index_; }
  double food_per_episode() const;  // mean over the recent completed window

  void save_resume_bundle(const std::string& path) const;
  void load_resume_bundle(const std::string& path);
  void save_policy_checkpoint(const std::string& path) const;

 private:
  void write_metrics_row(const RolloutBuffer& buf, const UpdateStats& stats,
                         std::ostream& os) const;

  ExperimentConfig cfg_;
  ObservationLayout layout_;
  std::vector<Environment> envs_;
  PolicyParams params_;
  Adam adam_;
  Rng sample_rng_;   // action sampling + minibatch shuffling
  Rng reseed_rng_;   // episode reseeding
  MatrixXd hidden_;  // H x B, persists across rollouts
  MatrixXd obs_;     // D x B, current observations
  std::int64_t env_steps_ = 0;
  std::int64_t update_index_ = 0;
  std::vector<double> ep_food_;            // per env, current episode
  std::deque<double> completed_food_;      // per-agent food of completed episodes
};

}  // namespace efish

#endif  // EFISH_TRAINER_HPP_
