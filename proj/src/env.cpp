#include "efish/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "efish/errors.hpp"

namespace efish {

namespace {
constexpr double kTieTol = 1e-12;
constexpr int kPlacementAttempts = 10000;

Vec2 clamp_to_arena(Vec2 p, const ArenaConfig& cfg) {
  return {std::clamp(p.x, 0.0, cfg.width_m), std::clamp(p.y, 0.0, cfg.height_m)};
}
}  // namespace

KinematicsResult apply_kinematics(const AgentState& agent, const ActionCommand& action,
                                  const ArenaConfig& config) {
  KinematicsResult out{agent, false};
  AgentState& a = out.agent;
  a.heading = wrap_angle(a.heading + action.turn * config.omega_max_rps * config.dt_s);
  a.speed = action.thrust * config.v_max_mps;
  const Vec2 raw = a.pos + (a.speed * config.dt_s) * unit_from_angle(a.heading);
  a.pos = clamp_to_arena(raw, config);
  out.wall_contact = (a.pos.x != raw.x) || (a.pos.y != raw.y);
  return out;
}

void update_food(WorldState& state, const ArenaConfig& config, StepEvents& events) {
  // Consumption: each active item goes to the nearest in-range agent.
  for (std::size_t f = 0; f < state.food.size(); ++f) {
    auto& item = state.food[f];
    if (!item.active) continue;
    int eater = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : state.agents) {
      if (!a.alive) continue;
      const double d = (a.pos - item.pos).norm();
      if (d > config.eat_range_m) continue;
      if (d < best - kTieTol || (std::abs(d - best) <= kTieTol && (eater < 0 || a.id < eater))) {
        best = std::min(best, d);
        eater = a.id;
      }
    }
    if (eater >= 0) {
      item.active = false;
      state.agents[eater].food_eaten += 1;
      events.food_eaten[eater].push_back(static_cast<int>(f));
    }
  }
  // Replenishment: every missing item flips an independent coin.
  for (auto& item : state.food) {
    if (item.active) continue;
    const auto& patch = config.patches[item.patch_id];
    if (patch.replenish_prob <= 0.0) continue;
    if (!state.rng.bernoulli(patch.replenish_prob)) continue;
    item.pos = clamp_to_arena(state.rng.in_disc(patch.center, patch.radius_m), config);
    item.active = true;
  }
}

void resolve_bites(WorldState& state, const std::vector<ActionCommand>& actions,
                   const ArenaConfig& config, StepEvents& events) {
  constexpr double kCone = kPi / 3.0;  // +-60 degrees
  for (const auto& a : state.agents) {
    if (!a.alive || !actions[a.id].bite) continue;
    int target = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : state.agents) {
      if (b.id == a.id || !b.alive) continue;
      const Vec2 rel = b.pos - a.pos;
      const double d = rel.norm();
      if (d > config.bite_range_m) continue;
      const double bearing = wrap_angle(std::atan2(rel.y, rel.x) - a.heading);
      if (std::abs(bearing) > kCone) continue;
      if (d < best - kTieTol || (std::abs(d - best) <= kTieTol && (target < 0 || b.id < target))) {
        best = std::min(best, d);
        target = b.id;
      }
    }
    if (target >= 0) {
      events.bites_delivered[a.id].push_back(target);
      events.bites_received[target].push_back(a.id);
    }
  }
}

std::vector<double> compute_rewards(const StepEvents& events, const WorldState& state,
                                    const RewardConfig& rcfg) {
  const int n = static_cast<int>(state.agents.size());
  std::vector<double> r(n, 0.0);
  for (int i = 0; i < n; ++i) {
    r[i] += rcfg.r_food * static_cast<double>(events.food_eaten[i].size());
    r[i] -= rcfg.c_eod * static_cast<double>(events.eods[i]);
    for (int j : events.bites_delivered[i]) {
      const bool biter_dominant = state.agents[i].dominance > state.agents[j].dominance;
      r[i] -= biter_dominant ? rcfg.p_small : rcfg.p_big;
      r[j] -= biter_dominant ? rcfg.p_big : rcfg.p_small;
    }
  }
  return r;
}

WorldState reset_env(const ArenaConfig& config, std::uint64_t seed) {
  WorldState state;
  state.t = 0;
  state.rng.reseed(seed, 0);
  const double min_sep = 2.0 * config.body_length_m;
  state.agents.resize(config.n_agents);
  for (int i = 0; i < config.n_agents; ++i) {
    AgentState& a = state.agents[i];
    a.id = i;
    a.hidden_ref = i;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Vec2 p{state.rng.uniform(0.0, config.width_m),
                   state.rng.uniform(0.0, config.height_m)};
      placed = true;
      for (int j = 0; j < i; ++j)
        if ((p - state.agents[j].pos).norm() < min_sep) {
          placed = false;
          break;
        }
      if (placed) a.pos = p;
    }
    if (!placed)
      throw ConfigError("reset_env: arena too small to place " +
                        std::to_string(config.n_agents) + " agents at min separation " +
                        std::to_string(min_sep) + " m");
    a.heading = state.rng.uniform(-kPi, kPi);
    a.dominance = static_cast<double>(1 + state.rng.uniform_int(3));
  }
  for (std::size_t p = 0; p < config.patches.size(); ++p) {
    const auto& patch = config.patches[p];
    for (int k = 0; k < patch.capacity; ++k) {
      FoodItem item;
      item.patch_id = static_cast<int>(p);
      item.radius_m = patch.food_radius_m;
      item.polarizability = patch.polarizability;
      item.pos = clamp_to_arena(state.rng.in_disc(patch.center, patch.radius_m), config);
      item.active = true;
      state.food.push_back(item);
    }
  }
  return state;
}

std::vector<Eigen::VectorXd> Environment::reset(std::uint64_t seed) {
  state_ = reset_env(cfg_.arena, seed);
  scene_ = build_scene_sources(state_, cfg_.arena, cfg_.field);
  return observe_all();
}

std::vector<Eigen::VectorXd> Environment::observe_all() {
  const auto layout = obs_layout();
  std::vector<EodEvent> events;
  for (const auto& a : state_.agents) {
    if (!a.alive || !a.eod_now) continue;
    events.push_back({a.id, agent_head(a, cfg_.arena.body_length_m),
                      cfg_.field.eod_moment_base * a.dominance});
  }
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(state_.agents.size());
  for (auto& a : state_.agents) {
    if (!a.alive) {
      obs.push_back(Eigen::VectorXd::Zero(layout.obs_dim()));
      continue;
    }
    Eigen::VectorXd morm =
        mormyromast_read(a, state_, scene_, cfg_.arena, cfg_.field, cfg_.sensors);
    const Eigen::VectorXd amp_now = ampullary_read(a, scene_, cfg_.arena, cfg_.sensors);
    ampullary_update(a.ampullary_ema, amp_now, cfg_.arena.dt_s, cfg_.sensors.ampullary_tau_s);
    Eigen::VectorXd amp = a.ampullary_ema;
    Eigen::VectorXd ko = knollenorgan_read(a, events, cfg_.sensors, cfg_.field.r_min_m);
    if (cfg_.sensors.noise_sigma > 0.0) {
      const double s = cfg_.sensors.noise_sigma;
      for (int i = 0; i < morm.size(); ++i) morm[i] += s * state_.rng.normal();
      for (int i = 0; i < amp.size(); ++i) amp[i] += s * state_.rng.normal();
      for (int i = 0; i < ko.size(); ++i) ko[i] += s * state_.rng.normal();
    }
    obs.push_back(assemble_observation(morm, amp, ko, proprio_block(a, cfg_.arena), layout));
  }
  return obs;
}

StepResult Environment::step(const std::vector<ActionCommand>& actions) {
  const int n = cfg_.arena.n_agents;
  if (static_cast<int>(actions.size()) != n)
    throw ContractError("step: expected " + std::to_string(n) + " actions, got " +
                        std::to_string(actions.size()));
  StepResult out;
  out.events = StepEvents(n);

  for (auto& a : state_.agents) {
    if (!a.alive) {
      a.eod_now = false;
      a.bite_now = false;
      continue;
    }
    a.eod_now = actions[a.id].eod;
    a.bite_now = actions[a.id].bite;
    out.events.eods[a.id] = a.eod_now ? 1 : 0;
    auto kin = apply_kinematics(a, actions[a.id], cfg_.arena);
    a = kin.agent;
    out.events.wall_contacts[a.id] = kin.wall_contact ? 1 : 0;
  }
  resolve_bites(state_, actions, cfg_.arena, out.events);
  update_food(state_, cfg_.arena, out.events);
  scene_ = build_scene_sources(state_, cfg_.arena, cfg_.field);
  out.obs = observe_all();
  out.rewards = compute_rewards(out.events, state_, cfg_.rewards);
  state_.t += 1;
  out.done = state_.t >= cfg_.arena.episode_len;
  return out;
}

}  // namespace efish
