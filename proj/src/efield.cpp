#include "efish/efield.hpp"

#include <algorithm>
#include <cmath>

namespace efish {

namespace {
constexpr double kDegenerate = 1e-300;  // below this |r| the field is defined as 0
}  // namespace

double dipole_potential(const DipoleSource& src, Vec2 point, double r_min) {
  const Vec2 r = point - src.pos;
  if (src.kind == SourceKind::Background) {
    // Uniform field E = moment * axis, so phi = -moment * (axis . r).
    return -src.moment * src.axis.dot(r);
  }
  const double rn = r.norm();
  if (rn < kDegenerate) return 0.0;
  const double re = std::max(rn, r_min);
  const Vec2 rhat = r / rn;
  return src.moment * src.axis.dot(rhat) / (re * re);
}

Vec2 dipole_field(const DipoleSource& src, Vec2 point, double r_min) {
  const Vec2 r = point - src.pos;
  if (src.kind == SourceKind::Background) return src.moment * src.axis;
  const double rn = r.norm();
  if (rn < kDegenerate) return {0.0, 0.0};
  const double re = std::max(rn, r_min);
  const Vec2 rhat = r / rn;
  const double ar = src.axis.dot(rhat);
  const double scale = src.moment / (re * re * re);
  return scale * (3.0 * ar * rhat - src.axis);
}

DipoleSource induced_dipole(const FoodItem& item, Vec2 ambient_field) {
  DipoleSource s;
  s.pos = item.pos;
  s.kind = SourceKind::InducedObject;
  const double amp = ambient_field.norm();
  s.axis = amp > 0.0 ? ambient_field / amp : Vec2{1.0, 0.0};
  const double r3 = item.radius_m * item.radius_m * item.radius_m;
  s.moment = item.polarizability * r3 * amp;
  return s;
}

std::array<DipoleSource, 4> image_dipoles(const DipoleSource& src,
                                          const ArenaConfig& arena, double k_wall) {
  const double w = arena.width_m;
  const double h = arena.height_m;
  std::array<DipoleSource, 4> out;
  // x = 0 and x = W walls: reflect x, flip the normal (x) axis component.
  out[0] = src;
  out[0].pos = {-src.pos.x, src.pos.y};
  out[0].axis = {-src.axis.x, src.axis.y};
  out[1] = src;
  out[1].pos = {2.0 * w - src.pos.x, src.pos.y};
  out[1].axis = {-src.axis.x, src.axis.y};
  // y = 0 and y = H walls.
  out[2] = src;
  out[2].pos = {src.pos.x, -src.pos.y};
  out[2].axis = {src.axis.x, -src.axis.y};
  out[3] = src;
  out[3].pos = {src.pos.x, 2.0 * h - src.pos.y};
  out[3].axis = {src.axis.x, -src.axis.y};
  for (auto& img : out) {
    img.moment = src.moment * k_wall;
    img.kind = SourceKind::WallImage;
  }
  return out;
}

SceneSources build_scene_sources(const WorldState& state, const ArenaConfig& arena,
                                 const FieldConfig& field) {
  SceneSources scene;
  scene.r_min = field.r_min_m;
  const double time_s = static_cast<double>(state.t) * arena.dt_s;
  scene.background_amp =
      field.background_amp * std::sin(2.0 * kPi * time_s / field.background_period_s);

  // Direct EOD dipoles at the emitters' heads, moment scaling with dominance.
  std::vector<std::size_t> direct;
  for (const auto& agent : state.agents) {
    if (!agent.alive || !agent.eod_now) continue;
    DipoleSource d;
    d.pos = agent_head(agent, arena.body_length_m);
    d.axis = unit_from_angle(agent.heading);
    d.moment = field.eod_moment_base * agent.dominance;
    d.kind = SourceKind::AgentEod;
    direct.push_back(scene.sources.size());
    scene.sources.push_back(d);
    scene.emitter.push_back(agent.id);
  }

  if (!direct.empty()) {
    // One composite induced dipole per active item; keep the per-emitter
    // breakdown so sensors can attribute scatter to individual EODs.
    for (std::size_t i = 0; i < state.food.size(); ++i) {
      const auto& item = state.food[i];
      if (!item.active) continue;
      InducedContribution contrib;
      contrib.item_index = static_cast<int>(i);
      contrib.pos = item.pos;
      Vec2 drive;
      for (std::size_t si : direct) {
        const Vec2 e = dipole_field(scene.sources[si], item.pos, scene.r_min);
        const double r3 = item.radius_m * item.radius_m * item.radius_m;
        contrib.per_emitter.emplace_back(scene.emitter[si],
                                         item.polarizability * r3 * e);
        drive += e;
      }
      scene.sources.push_back(induced_dipole(item, drive));
      scene.emitter.push_back(-1);
      scene.induced.push_back(std::move(contrib));
    }

    // First-order wall images of every real dipole (direct + induced).
    if (field.k_wall != 0.0) {
      const std::size_t n_real = scene.sources.size();
      for (std::size_t i = 0; i < n_real; ++i) {
        const int parent_emitter = scene.emitter[i];
        for (const auto& img : image_dipoles(scene.sources[i], arena, field.k_wall)) {
          scene.sources.push_back(img);
          scene.emitter.push_back(parent_emitter);
        }
      }
    }
  }

  DipoleSource bg;
  bg.kind = SourceKind::Background;
  bg.axis = unit_from_angle(field.background_dir_rad);
  bg.moment = scene.background_amp;
  scene.sources.push_back(bg);
  scene.emitter.push_back(-1);
  return scene;
}

}  // namespace efish
