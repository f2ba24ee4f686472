#ifndef EFISH_WORLD_HPP_
#define EFISH_WORLD_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "efish/geometry.hpp"
#include "efish/rng.hpp"

namespace efish {

// Continuous action, already clamped to its ranges by the sampler.
struct ActionCommand {
  double thrust = 0.0;  // [0, 1] fraction of v_max
  double turn = 0.0;    // [-1, 1] fraction of omega_max
  bool eod = false;
  bool bite = false;
};

struct AgentState {
  int id = 0;
  Vec2 pos;
  double heading = 0.0;  // [-pi, pi)
  double speed = 0.0;    // m/s, set by the last kinematics update
  double dominance = 1.0;
  int food_eaten = 0;
  bool eod_now = false;
  bool bite_now = false;
  bool alive = true;
  int hidden_ref = -1;  // opaque slot of this agent's policy hidden state
  Eigen::VectorXd ampullary_ema;  // low-pass state of the passive channel
};

struct FoodItem {
  Vec2 pos;
  double radius_m = 0.01;
  double polarizability = 1.0;  // signed: conductivity contrast
  bool active = true;
  int patch_id = 0;
};

// Everything that happened in one step, per agent. Rewards are recomputable
// from this record alone.
struct StepEvents {
  std::vector<std::vector<int>> food_eaten;       // item indices
  std::vector<std::vector<int>> bites_delivered;  // target agent ids
  std::vector<std::vector<int>> bites_received;   // source agent ids
  std::vector<int> wall_contacts;                 // 0/1 this step
  std::vector<std::uint8_t> eods;                 // 0/1 this step

  explicit StepEvents(int n_agents = 0)
      : food_eaten(n_agents),
        bites_delivered(n_agents),
        bites_received(n_agents),
        wall_contacts(n_agents, 0),
        eods(n_agents, 0) {}
};

// EOD dipoles sit at the head, half a body length ahead of the center.
inline Vec2 agent_head(const AgentState& a, double body_length_m) {
  return a.pos + (0.5 * body_length_m) * unit_from_angle(a.heading);
}

// Full simulation state; single source of truth for one environment.
struct WorldState {
  std::int64_t t = 0;
  std::vector<AgentState> agents;
  std::vector<FoodItem> food;
  Rng rng;
};

}  // namespace efish

#endif  // EFISH_WORLD_HPP_
