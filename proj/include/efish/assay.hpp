#ifndef EFISH_ASSAY_HPP_
#define EFISH_ASSAY_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "efish/env.hpp"
#include "efish/episode_log.hpp"
#include "efish/policy.hpp"

namespace efish {

// Per-agent action source driving recorded episodes and assay trials.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const ObservationLayout& layout) { (void)layout; }
  virtual ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) = 0;
};

// Wraps shared PolicyParams with a private hidden state.
class PolicyController : public Controller {
 public:
  PolicyController(const PolicyParams* params, bool stochastic)
      : params_(params), stochastic_(stochastic) {}
  void reset(const ObservationLayout& layout) override;
  ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) override;

 private:
  const PolicyParams* params_;
  bool stochastic_;
  VectorXd h_;
};

// Uniform random actions; the training baseline.
class RandomController : public Controller {
 public:
  ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) override;
};

// Two-state (burst/pause) Markov EOD emitter with a slow random walk;
// produces heavy-tailed pulse intervals by construction.
class BurstyEodController : public Controller {
 public:
  BurstyEodController(double p_emit_burst = 0.9, double p_emit_pause = 0.02,
                      double p_burst_to_pause = 0.1, double p_pause_to_burst = 0.02)
      : p_emit_burst_(p_emit_burst),
        p_emit_pause_(p_emit_pause),
        p_burst_to_pause_(p_burst_to_pause),
        p_pause_to_burst_(p_pause_to_burst) {}
  void reset(const ObservationLayout& layout) override;
  ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) override;

 private:
  double p_emit_burst_, p_emit_pause_, p_burst_to_pause_, p_pause_to_burst_;
  bool burst_ = true;
};

// Assay agent A: sits still and pulses every step (a beacon).
class BeaconController : public Controller {
 public:
  ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) override;
};

// Assay agent B: turns toward the loudest Knollenorgan bin and swims; with
// no signal it holds course. Never emits or bites.
class KoSeekerController : public Controller {
 public:
  explicit KoSeekerController(const ArenaConfig& arena) : arena_(arena) {}
  void reset(const ObservationLayout& layout) override { layout_ = layout; }
  ActionCommand act(const Eigen::VectorXd& obs, Rng& rng) override;

 private:
  ArenaConfig arena_;
  ObservationLayout layout_;
};

// Runs one full episode with the given per-agent controllers and returns
// the log. Controller sampling uses a stream derived from `seed`; the
// environment itself is seeded with `seed` (stored in the log header).
EpisodeLog record_episode(const ExperimentConfig& cfg,
                          const std::vector<std::unique_ptr<Controller>>& controllers,
                          std::uint64_t seed);

struct ReplayResult {
  bool rewards_match = false;
  bool states_match = false;
  int first_mismatch_step = -1;
};

// Re-runs a logged episode from its seed, feeding the logged actions, and
// compares rewards and poses bit for bit.
ReplayResult replay_episode(const ExperimentConfig& cfg, const EpisodeLog& log);

struct AssayTrial {
  int trial = 0;
  bool success = false;
  int steps_to_reach = -1;  // -1 when the patch was never reached
  double b_food = 0.0;
  Vec2 b_start;
};

struct AssayCondition {
  double success_rate = 0.0;
  double mean_b_food = 0.0;
  std::vector<AssayTrial> trials;
};

struct SweepCell {
  int ix = 0, iy = 0;
  Vec2 center;
  int n_trials = 0;
  double success_rate = 0.0;
};

struct AssayResult {
  AssayCondition with_a;
  AssayCondition control;  // identical trial seeds, A removed
  std::vector<SweepCell> sweep;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>(int agent_id)>;

// Two-fish protocol: A at the center of a fully replenishing patch, B
// spawned uniformly within the communication radius of A. Each trial runs
// max_steps; success = B's center enters the patch at any step. The control
// repeats every trial (same seeds) with A removed. sweep_grid > 0 adds a
// success-by-start-cell sweep with B started at cell centers.
AssayResult run_two_fish_assay(const ExperimentConfig& cfg,
                               const ControllerFactory& make_controller);

// Factory helpers for the two standard drivers.
ControllerFactory policy_controller_factory(const PolicyParams* params, bool stochastic);
ControllerFactory scripted_assay_factory(const ArenaConfig& arena);

}  // namespace efish

#endif  // EFISH_ASSAY_HPP_
