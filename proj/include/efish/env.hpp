#ifndef EFISH_ENV_HPP_
#define EFISH_ENV_HPP_

#include <vector>

#include <Eigen/Core>

#include "efish/config.hpp"
#include "efish/efield.hpp"
#include "efish/sensors.hpp"
#include "efish/world.hpp"

namespace efish {

struct KinematicsResult {
  AgentState agent;
  bool wall_contact = false;
};

// heading' = wrap(heading + turn*omega_max*dt); pos moves along the new
// heading and clamps to the arena walls.
KinematicsResult apply_kinematics(const AgentState& agent, const ActionCommand& action,
                                  const ArenaConfig& config);

// Consumption (nearest agent wins, ties by lower id) then per-patch
// replenishment of missing items. Mutates state, records events.
void update_food(WorldState& state, const ArenaConfig& config, StepEvents& events);

// Each biting agent hits the nearest live conspecific within bite_range_m
// and within +-60 degrees of its heading; both sides are recorded.
void resolve_bites(WorldState& state, const std::vector<ActionCommand>& actions,
                   const ArenaConfig& config, StepEvents& events);

// reward_i = r_food * eaten_i - c_eod * eod_i - bite penalties. A bite by a
// strictly more dominant agent costs the biter p_small and the bitten p_big;
// otherwise the roles flip. Nothing depends on other agents' food.
std::vector<double> compute_rewards(const StepEvents& events, const WorldState& state,
                                    const RewardConfig& rcfg);

struct StepResult {
  std::vector<Eigen::VectorXd> obs;
  std::vector<double> rewards;
  StepEvents events;
  bool done = false;
};

// Uniform non-overlapping placement (min separation 2x body length),
// patches filled to capacity, dominance drawn from {1,2,3}.
WorldState reset_env(const ArenaConfig& config, std::uint64_t seed);

class Environment {
 public:
  Environment(const ExperimentConfig& cfg) : cfg_(cfg) {}

  // Seeds the world RNG and returns the initial observations.
  std::vector<Eigen::VectorXd> reset(std::uint64_t seed);

  // Fixed order: kinematics -> bites -> food -> scene -> sensors -> rewards.
  StepResult step(const std::vector<ActionCommand>& actions);

  const WorldState& state() const { return state_; }
  WorldState& mutable_state() { return state_; }
  const ExperimentConfig& config() const { return cfg_; }
  ObservationLayout obs_layout() const { return ObservationLayout::from(cfg_.sensors); }
  const SceneSources& last_scene() const { return scene_; }

  // Rebuilds field sources after external state edits (assay placement).
  void refresh_scene() { scene_ = build_scene_sources(state_, cfg_.arena, cfg_.field); }

  // Transduces the current state for every agent (dead agents read zeros).
  // Advances ampullary EMAs and consumes sensor-noise draws in agent order.
  std::vector<Eigen::VectorXd> observe_all();

 private:
  ExperimentConfig cfg_;
  WorldState state_;
  SceneSources scene_;
};

}  // namespace efish

#endif  // EFISH_ENV_HPP_
