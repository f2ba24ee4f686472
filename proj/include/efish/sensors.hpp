#ifndef EFISH_SENSORS_HPP_
#define EFISH_SENSORS_HPP_

#include <vector>

#include <Eigen/Core>

#include "efish/config.hpp"
#include "efish/efield.hpp"
#include "efish/world.hpp"

namespace efish {

// Block order inside the observation vector: mormyromast, ampullary,
// knollenorgan (dropped entirely when disabled), proprioception.
// Proprio is (speed, sin heading, cos heading, eod_now, dominance,
// wall distances to x=0 / x=W / y=0 / y=H).
struct ObservationLayout {
  int n_mormyromast = 0;
  int n_ampullary = 0;
  int n_knollenorgan = 0;  // 0 when the channel is disabled
  static constexpr int kProprioDim = 9;

  int obs_dim() const { return n_mormyromast + n_ampullary + n_knollenorgan + kProprioDim; }
  int mormyromast_offset() const { return 0; }
  int ampullary_offset() const { return n_mormyromast; }
  int knollenorgan_offset() const { return n_mormyromast + n_ampullary; }
  int proprio_offset() const { return n_mormyromast + n_ampullary + n_knollenorgan; }

  static ObservationLayout from(const SensorLayout& layout);
};

// A conspecific EOD this step, as seen by the long-range channel.
struct EodEvent {
  int emitter_id = -1;
  Vec2 pos;            // dipole (head) position
  double moment = 0.0;
};

// Receptor geometry in world coordinates. Mormyromasts sit on a body
// ellipse (semi-axes body/2 along the heading, body/4 across); ampullary
// receptors sit on a circle of radius body/4 so that rotating the body by
// one receptor spacing permutes the channels exactly.
Vec2 mormyromast_point(const AgentState& agent, double body_length_m, int i, int n);
Vec2 ampullary_point(const AgentState& agent, double body_length_m, int i, int n);
Vec2 ampullary_normal(const AgentState& agent, int i, int n);

// The set of EODs whose scattered field this agent can read: its own (when
// it emitted) plus, with collective sensing, conspecific EODs within
// knollenorgan_range_m. Returned as agent ids.
std::vector<int> driving_emitters(const AgentState& agent, const WorldState& state,
                                  const ArenaConfig& arena, const SensorLayout& layout);

// Dipoles making up the scattered field attributable to `drivers`: wall
// images of their direct EODs plus the parts of each induced dipole they
// drove (and the images of those parts). Direct EOD dipoles themselves and
// the background are never included — the channel reads distortions only.
std::vector<DipoleSource> scatter_sources_for(const std::vector<int>& drivers,
                                              const SceneSources& scene,
                                              const ArenaConfig& arena,
                                              const FieldConfig& field);

// Active electrosensing: |scattered field| per receptor, zero block when no
// driving EOD exists this step.
Eigen::VectorXd mormyromast_read(const AgentState& agent, const WorldState& state,
                                 const SceneSources& scene, const ArenaConfig& arena,
                                 const FieldConfig& field, const SensorLayout& layout);

// Passive channel, instantaneous: background field projected on each
// receptor's outward normal. The env low-passes this with ampullary_update.
Eigen::VectorXd ampullary_read(const AgentState& agent, const SceneSources& scene,
                               const ArenaConfig& arena, const SensorLayout& layout);

// One EMA step with time constant tau_s: ema += (1 - exp(-dt/tau)) * (x - ema).
void ampullary_update(Eigen::VectorXd& ema, const Eigen::VectorXd& instant,
                      double dt_s, double tau_s);

// Long-range pulse channel: conspecific EODs within range binned by
// egocentric bearing, amplitude moment / max(d, r_min)^2. Own events are
// skipped; disabled layout yields a zero-length vector.
Eigen::VectorXd knollenorgan_read(const AgentState& agent,
                                  const std::vector<EodEvent>& events,
                                  const SensorLayout& layout, double r_min);

// Concatenation in the fixed block order; lengths are checked against the
// layout and violations raise ContractError.
Eigen::VectorXd assemble_observation(const Eigen::VectorXd& mormyromast,
                                     const Eigen::VectorXd& ampullary,
                                     const Eigen::VectorXd& knollenorgan,
                                     const Eigen::VectorXd& proprio,
                                     const ObservationLayout& layout);

// Proprio block for one agent (see ObservationLayout for the order).
Eigen::VectorXd proprio_block(const AgentState& agent, const ArenaConfig& arena);

}  // namespace efish

#endif  // EFISH_SENSORS_HPP_
