#ifndef EFISH_EFIELD_HPP_
#define EFISH_EFIELD_HPP_

#include <array>
#include <utility>
#include <vector>

#include "efish/config.hpp"
#include "efish/geometry.hpp"
#include "efish/world.hpp"

namespace efish {

// AgentEod covers both "self" and "conspecific" EODs; which one it is depends
// on the observer, so the scene stores the emitter id and readers filter.
enum class SourceKind : std::uint8_t { AgentEod, InducedObject, WallImage, Background };

struct DipoleSource {
  Vec2 pos;
  Vec2 axis{1.0, 0.0};  // unit vector
  double moment = 0.0;  // signed; Background abuses this as the field amplitude
  SourceKind kind = SourceKind::AgentEod;
};

// Vector moment a single emitter induces in one food item. Induction is
// linear in the driving field, so the scene's composite induced dipole is
// the sum of these and sensors can attribute scatter to individual emitters.
struct InducedContribution {
  int item_index = 0;
  Vec2 pos;
  std::vector<std::pair<int, Vec2>> per_emitter;  // (agent id, vector moment)
};

struct SceneSources {
  std::vector<DipoleSource> sources;
  // Per source: the agent whose EOD produced it (directly for AgentEod,
  // as the reflected EOD for WallImage), or -1.
  std::vector<int> emitter;
  std::vector<InducedContribution> induced;
  double background_amp = 0.0;  // amplitude at this step, modulation applied
  double r_min = 0.02;

  std::size_t size() const { return sources.size(); }
};

// Point-dipole potential with 1/r^2 decay, softened below r_min. For
// |r| < r_min both the potential and the field use the clamped radius, so
// E = -grad(phi) holds exactly only outside the softening radius (which is
// the stated domain); inside, readings stay bounded.
double dipole_potential(const DipoleSource& src, Vec2 point, double r_min);
Vec2 dipole_field(const DipoleSource& src, Vec2 point, double r_min);

// First-order polarization of a food item by the local field.
DipoleSource induced_dipole(const FoodItem& item, Vec2 ambient_field);

// One mirror image per wall, first order. The normal axis component flips
// and the moment scales by k_wall; k_wall = +1 cancels the wall-normal field
// component (insulating boundary), k_wall = 0 is open water.
std::array<DipoleSource, 4> image_dipoles(const DipoleSource& src,
                                          const ArenaConfig& arena, double k_wall);

// Assembles the per-step scene: direct EOD dipoles, one composite induced
// dipole per active food item (driven by the superposed direct EOD fields),
// wall images of every real dipole, and the uniform background source.
SceneSources build_scene_sources(const WorldState& state, const ArenaConfig& arena,
                                 const FieldConfig& field);

// Superposed field of all sources not rejected by `exclude(index)`.
template <typename ExcludeFn>
Vec2 field_at(const SceneSources& scene, Vec2 point, ExcludeFn&& exclude) {
  Vec2 e;
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    if (exclude(i)) continue;
    e += dipole_field(scene.sources[i], point, scene.r_min);
  }
  return e;
}

inline Vec2 field_at(const SceneSources& scene, Vec2 point) {
  return field_at(scene, point, [](std::size_t) { return false; });
}

}  // namespace efish

#endif  // EFISH_EFIELD_HPP_
