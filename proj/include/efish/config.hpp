#ifndef EFISH_CONFIG_HPP_
#define EFISH_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "efish/geometry.hpp"

namespace efish {

enum class CompetitionMode { Competition, NoCompetition };

// One circular food patch. replenish_prob < 0 means "not set": it
// materializes to 1.0 in NoCompetition mode (effectively unlimited food)
// and 0.0 in Competition mode (zero-sum resource).
struct PatchSpec {
  Vec2 center{0.5, 0.5};
  double radius_m = 0.2;
  int capacity = 10;
  double replenish_prob = -1.0;
  double food_radius_m = 0.01;
  double polarizability = 1.0;
};

struct ArenaConfig {
  double width_m = 1.0;
  double height_m = 1.0;
  double dt_s = 0.04;        // 9 steps = the 0.36 s displacement window
  int episode_len = 3000;    // 2 minutes
  int n_agents = 4;
  CompetitionMode competition_mode = CompetitionMode::NoCompetition;
  std::vector<PatchSpec> patches;  // defaulted to one central patch at parse
  double bite_range_m = 0.1;
  double eat_range_m = 0.03;
  double v_max_mps = 0.2;
  double omega_max_rps = kPi;
  double body_length_m = 0.1;
  std::uint64_t seed = 1;  // mirrored from the experiment seed
};

// Electric-field engine parameters.
struct FieldConfig {
  double r_min_m = 0.02;          // softening radius
  double k_wall = 1.0;            // image coefficient; insulating walls = +1, 0 = open water
  double eod_moment_base = 1e-3;  // dipole moment of a dominance-1 EOD
  double background_amp = 0.1;    // uniform ambient field amplitude
  double background_period_s = 2.0;
  double background_dir_rad = 0.0;
};

struct SensorLayout {
  int n_mormyromast = 20;
  int n_ampullary = 8;
  int n_knollenorgan_bins = 12;
  double knollenorgan_range_m = 0.5;  // also the communication radius
  bool knollenorgan_enabled = true;
  bool collective_sensing_enabled = true;
  double noise_sigma = 0.01;   // 1% of the unit reference reading
  double ampullary_tau_s = 0.2;
};

struct RewardConfig {
  double r_food = 1.0;
  double c_eod = 0.01;
  double p_small = 0.1;  // penalty on the dominant side of a bite
  double p_big = 1.0;    // penalty on the subordinate side
};

struct PolicyConfig {
  int hidden_dim = 64;
};

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int seg_len = 32;  // minibatch segment length L; must divide rollout_steps
  int n_minibatches = 4;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::int64_t total_env_steps = 2'000'000;
  int n_envs = 8;
  int rollout_steps = 256;  // T
  int checkpoint_interval = 50;  // updates between checkpoints
  int threads = 1;               // 1 = strict determinism mode
  bool centralized_critic = false;  // reserved; only false is implemented
};

struct AssayConfig {
  Vec2 patch_center{0.5, 0.5};
  double patch_radius_m = 0.15;
  int patch_capacity = 5;
  double a_dominance = 2.0;
  double b_dominance = 2.0;
  int n_trials = 100;
  int max_steps = 600;
  bool remove_a = false;  // control condition: agent A absent
  int sweep_grid = 0;     // NxN spatial success sweep; 0 disables
};

struct ExperimentConfig {
  ArenaConfig arena;
  FieldConfig field;
  SensorLayout sensors;
  RewardConfig rewards;
  PolicyConfig policy;
  TrainConfig training;
  AssayConfig assay;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  std::uint64_t config_hash = 0;  // over the materialized form; set by parse/materialize
};

}  // namespace efish

#endif  // EFISH_CONFIG_HPP_
