#include "efish/sensors.hpp"

#include <algorithm>
#include <cmath>

#include "efish/errors.hpp"

namespace efish {

ObservationLayout ObservationLayout::from(const SensorLayout& layout) {
  ObservationLayout out;
  out.n_mormyromast = layout.n_mormyromast;
  out.n_ampullary = layout.n_ampullary;
  out.n_knollenorgan = layout.knollenorgan_enabled ? layout.n_knollenorgan_bins : 0;
  return out;
}

Vec2 mormyromast_point(const AgentState& agent, double body_length_m, int i, int n) {
  const double a = 0.5 * body_length_m;   // along the heading
  const double b = 0.25 * body_length_m;  // across
  const double th = 2.0 * kPi * i / n;
  const Vec2 body{a * std::cos(th), b * std::sin(th)};
  return agent.pos + body.rotated(agent.heading);
}

Vec2 ampullary_point(const AgentState& agent, double body_length_m, int i, int n) {
  const double r = 0.25 * body_length_m;
  const double th = 2.0 * kPi * i / n;
  const Vec2 body{r * std::cos(th), r * std::sin(th)};
  return agent.pos + body.rotated(agent.heading);
}

Vec2 ampullary_normal(const AgentState& agent, int i, int n) {
  const double th = 2.0 * kPi * i / n;
  return Vec2{std::cos(th), std::sin(th)}.rotated(agent.heading);
}

std::vector<int> driving_emitters(const AgentState& agent, const WorldState& state,
                                  const ArenaConfig& arena, const SensorLayout& layout) {
  std::vector<int> drivers;
  if (agent.alive && agent.eod_now) drivers.push_back(agent.id);
  if (layout.collective_sensing_enabled) {
    for (const auto& other : state.agents) {
      if (other.id == agent.id || !other.alive || !other.eod_now) continue;
      const Vec2 head = agent_head(other, arena.body_length_m);
      if ((head - agent.pos).norm() <= layout.knollenorgan_range_m)
        drivers.push_back(other.id);
    }
  }
  return drivers;
}

std::vector<DipoleSource> scatter_sources_for(const std::vector<int>& drivers,
                                              const SceneSources& scene,
                                              const ArenaConfig& arena,
                                              const FieldConfig& field) {
  std::vector<DipoleSource> out;
  if (drivers.empty()) return out;
  auto driven = [&](int id) {
    return std::find(drivers.begin(), drivers.end(), id) != drivers.end();
  };

  // Wall reflections of the drivers' direct EODs (images of induced dipoles
  // carry emitter -1 in the scene and are rebuilt per driving set below).
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    if (scene.sources[i].kind == SourceKind::WallImage && driven(scene.emitter[i]))
      out.push_back(scene.sources[i]);
  }

  // The slice of each induced dipole the drivers are responsible for.
  // Induction is linear, so this is just the sum of their vector moments.
  for (const auto& contrib : scene.induced) {
    Vec2 p;
    for (const auto& [emitter, part] : contrib.per_emitter)
      if (driven(emitter)) p += part;
    const double m = p.norm();
    if (m <= 0.0) continue;
    DipoleSource d;
    d.pos = contrib.pos;
    d.axis = p / m;
    d.moment = m;
    d.kind = SourceKind::InducedObject;
    if (field.k_wall != 0.0)
      for (const auto& img : image_dipoles(d, arena, field.k_wall)) out.push_back(img);
    out.push_back(d);
  }
  return out;
}

Eigen::VectorXd mormyromast_read(const AgentState& agent, const WorldState& state,
                                 const SceneSources& scene, const ArenaConfig& arena,
                                 const FieldConfig& field, const SensorLayout& layout) {
  Eigen::VectorXd block = Eigen::VectorXd::Zero(layout.n_mormyromast);
  const auto drivers = driving_emitters(agent, state, arena, layout);
  if (drivers.empty()) return block;  // no carrier, no active sensing
  const auto scatter = scatter_sources_for(drivers, scene, arena, field);
  if (scatter.empty()) return block;
  for (int i = 0; i < layout.n_mormyromast; ++i) {
    const Vec2 q = mormyromast_point(agent, arena.body_length_m, i, layout.n_mormyromast);
    Vec2 e;
    for (const auto& src : scatter) e += dipole_field(src, q, scene.r_min);
    block[i] = e.norm();
  }
  return block;
}

Eigen::VectorXd ampullary_read(const AgentState& agent, const SceneSources& scene,
                               const ArenaConfig& arena, const SensorLayout& layout) {
  Eigen::VectorXd block(layout.n_ampullary);
  for (int i = 0; i < layout.n_ampullary; ++i) {
    const Vec2 q = ampullary_point(agent, arena.body_length_m, i, layout.n_ampullary);
    Vec2 e;
    for (std::size_t s = 0; s < scene.sources.size(); ++s) {
      if (scene.sources[s].kind != SourceKind::Background) continue;
      e += dipole_field(scene.sources[s], q, scene.r_min);
    }
    block[i] = e.dot(ampullary_normal(agent, i, layout.n_ampullary));
  }
  return block;
}

void ampullary_update(Eigen::VectorXd& ema, const Eigen::VectorXd& instant,
                      double dt_s, double tau_s) {
  const double alpha = 1.0 - std::exp(-dt_s / tau_s);
  if (ema.size() != instant.size()) ema = Eigen::VectorXd::Zero(instant.size());
  ema += alpha * (instant - ema);
}

Eigen::VectorXd knollenorgan_read(const AgentState& agent,
                                  const std::vector<EodEvent>& events,
                                  const SensorLayout& layout, double r_min) {
  if (!layout.knollenorgan_enabled) return Eigen::VectorXd(0);
  Eigen::VectorXd bins = Eigen::VectorXd::Zero(layout.n_knollenorgan_bins);
  const int n = layout.n_knollenorgan_bins;
  for (const auto& ev : events) {
    if (ev.emitter_id == agent.id) continue;
    const Vec2 rel = ev.pos - agent.pos;
    const double d = rel.norm();
    if (d > layout.knollenorgan_range_m) continue;
    const double bearing = wrap_angle(std::atan2(rel.y, rel.x) - agent.heading);
    int bin = static_cast<int>(std::floor((bearing + kPi) / (2.0 * kPi) * n));
    bin = std::clamp(bin, 0, n - 1);  // guard the bearing == pi edge
    const double de = std::max(d, r_min);
    bins[bin] += ev.moment / (de * de);
  }
  return bins;
}

Eigen::VectorXd proprio_block(const AgentState& agent, const ArenaConfig& arena) {
  Eigen::VectorXd p(ObservationLayout::kProprioDim);
  p[0] = agent.speed;
  p[1] = std::sin(agent.heading);
  p[2] = std::cos(agent.heading);
  p[3] = agent.eod_now ? 1.0 : 0.0;
  p[4] = agent.dominance;
  p[5] = agent.pos.x;
  p[6] = arena.width_m - agent.pos.x;
  p[7] = agent.pos.y;
  p[8] = arena.height_m - agent.pos.y;
  return p;
}

Eigen::VectorXd assemble_observation(const Eigen::VectorXd& mormyromast,
                                     const Eigen::VectorXd& ampullary,
                                     const Eigen::VectorXd& knollenorgan,
                                     const Eigen::VectorXd& proprio,
                                     const ObservationLayout& layout) {
  if (mormyromast.size() != layout.n_mormyromast ||
      ampullary.size() != layout.n_ampullary ||
      knollenorgan.size() != layout.n_knollenorgan ||
      proprio.size() != ObservationLayout::kProprioDim)
    throw ContractError("assemble_observation: block lengths do not match layout");
  Eigen::VectorXd obs(layout.obs_dim());
  obs << mormyromast, ampullary, knollenorgan, proprio;
  return obs;
}

}  // namespace efish
