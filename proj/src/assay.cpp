#include "efish/assay.hpp"

#include <algorithm>
#include <cmath>

#include "efish/errors.hpp"

namespace efish {

namespace {
Vec2 clamp_to_arena(Vec2 p, const ArenaConfig& cfg) {
  return {std::clamp(p.x, 0.0, cfg.width_m), std::clamp(p.y, 0.0, cfg.height_m)};
}
}  // namespace

void PolicyController::reset(const ObservationLayout& layout) {
  if (layout.obs_dim() != params_->obs_dim)
    throw ContractError("policy controller: observation layout (" +
                        std::to_string(layout.obs_dim()) +
                        ") does not match checkpoint (" +
                        std::to_string(params_->obs_dim) + ")");
  h_ = VectorXd::Zero(params_->hidden_dim);
}

ActionCommand PolicyController::act(const Eigen::VectorXd& obs, Rng& rng) {
  const auto fwd = policy_forward(*params_, obs, h_);
  h_ = fwd.h.col(0);
  if (stochastic_) return sample_actions(fwd.heads.col(0), params_->log_std, rng).cmd;
  return mode_actions(fwd.heads.col(0));
}

ActionCommand RandomController::act(const Eigen::VectorXd&, Rng& rng) {
  ActionCommand cmd;
  cmd.thrust = rng.uniform();
  cmd.turn = rng.uniform(-1.0, 1.0);
  cmd.eod = rng.bernoulli(0.5);
  cmd.bite = rng.bernoulli(0.5);
  return cmd;
}

void BurstyEodController::reset(const ObservationLayout&) { burst_ = true; }

ActionCommand BurstyEodController::act(const Eigen::VectorXd&, Rng& rng) {
  ActionCommand cmd;
  cmd.eod = rng.bernoulli(burst_ ? p_emit_burst_ : p_emit_pause_);
  if (burst_) {
    if (rng.bernoulli(p_burst_to_pause_)) burst_ = false;
  } else {
    if (rng.bernoulli(p_pause_to_burst_)) burst_ = true;
  }
  cmd.thrust = 0.3;
  cmd.turn = rng.uniform(-0.3, 0.3);
  return cmd;
}

ActionCommand BeaconController::act(const Eigen::VectorXd&, Rng&) {
  ActionCommand cmd;
  cmd.eod = true;
  return cmd;
}

ActionCommand KoSeekerController::act(const Eigen::VectorXd& obs, Rng&) {
  ActionCommand cmd;
  cmd.thrust = 1.0;
  const int n = layout_.n_knollenorgan;
  if (n > 0) {
    const auto ko = obs.segment(layout_.knollenorgan_offset(), n);
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (ko[i] > ko[best]) best = i;
    constexpr double kThreshold = 0.02;  // above sensor-noise floor
    if (ko[best] > kThreshold) {
      const double bearing = -kPi + (best + 0.5) * 2.0 * kPi / n;
      const double full_turn = arena_.omega_max_rps * arena_.dt_s;
      cmd.turn = std::clamp(bearing / full_turn, -1.0, 1.0);
      cmd.thrust = std::abs(bearing) < kPi / 3.0 ? 1.0 : 0.2;
    }
  }
  return cmd;
}

EpisodeLog record_episode(const ExperimentConfig& cfg,
                          const std::vector<std::unique_ptr<Controller>>& controllers,
                          std::uint64_t seed) {
  const int n = cfg.arena.n_agents;
  if (static_cast<int>(controllers.size()) != n)
    throw ContractError("record_episode: one controller per agent required");

  Environment env(cfg);
  auto obs = env.reset(seed);
  const auto layout = env.obs_layout();
  for (const auto& c : controllers) c->reset(layout);
  Rng act_rng;
  act_rng.reseed(derive_seed(seed, 0x616374 /* "act" */), 0);

  EpisodeLog log;
  log.header.config_hash = cfg.config_hash;
  log.header.seed = seed;
  log.header.dt_s = cfg.arena.dt_s;
  log.header.n_agents = n;
  log.header.n_steps = static_cast<int>(cfg.arena.episode_len);
  log.header.mode = cfg.arena.competition_mode;
  log.header.knollenorgan_enabled = cfg.sensors.knollenorgan_enabled;
  log.header.collective_sensing_enabled = cfg.sensors.collective_sensing_enabled;
  log.rows.reserve(static_cast<std::size_t>(log.header.n_steps) * n);

  std::vector<ActionCommand> actions(n);
  for (int t = 0; t < log.header.n_steps; ++t) {
    for (int i = 0; i < n; ++i) actions[i] = controllers[i]->act(obs[i], act_rng);
    const auto res = env.step(actions);
    for (int i = 0; i < n; ++i) {
      const AgentState& a = env.state().agents[i];
      LogRow r;
      r.step = t;
      r.agent = i;
      r.eod = a.eod_now;
      r.bite = a.bite_now;
      r.wall_contact = res.events.wall_contacts[i] != 0;
      r.thrust = actions[i].thrust;
      r.turn = actions[i].turn;
      r.x = a.pos.x;
      r.y = a.pos.y;
      r.heading = a.heading;
      r.speed = a.speed;
      r.reward = res.rewards[i];
      r.food_inc = static_cast<int>(res.events.food_eaten[i].size());
      log.rows.push_back(r);
    }
    obs = res.obs;
  }
  return log;
}

ReplayResult replay_episode(const ExperimentConfig& cfg, const EpisodeLog& log) {
  if (log.header.config_hash != cfg.config_hash)
    throw ConfigError("replay: log config hash does not match this config");
  const int n = log.header.n_agents;
  Environment env(cfg);
  env.reset(log.header.seed);

  ReplayResult out;
  out.rewards_match = true;
  out.states_match = true;
  std::vector<ActionCommand> actions(n);
  for (int t = 0; t < log.header.n_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      const LogRow& r = log.at(t, i);
      actions[i] = {r.thrust, r.turn, r.eod, r.bite};
    }
    const auto res = env.step(actions);
    for (int i = 0; i < n; ++i) {
      const LogRow& r = log.at(t, i);
      const AgentState& a = env.state().agents[i];
      const bool reward_ok = res.rewards[i] == r.reward;
      const bool state_ok =
          a.pos.x == r.x && a.pos.y == r.y && a.heading == r.heading && a.speed == r.speed;
      if (!reward_ok) out.rewards_match = false;
      if (!state_ok) out.states_match = false;
      if ((!reward_ok || !state_ok) && out.first_mismatch_step < 0)
        out.first_mismatch_step = t;
    }
  }
  return out;
}

namespace {

AssayTrial run_trial(const ExperimentConfig& acfg, const ControllerFactory& make_ctrl,
                     int trial, bool remove_a, const Vec2* b_start_override) {
  const auto& assay = acfg.assay;
  Environment env(acfg);
  env.reset(derive_seed(acfg.seed, 5000 + trial));

  Rng place;
  place.reseed(derive_seed(acfg.seed, 6000 + trial), 0);
  WorldState& st = env.mutable_state();
  AgentState& a = st.agents[0];
  AgentState& b = st.agents[1];
  a.pos = assay.patch_center;
  a.heading = place.uniform(-kPi, kPi);
  a.dominance = static_cast<double>(assay.a_dominance);
  a.alive = !remove_a;
  a.speed = 0.0;
  a.eod_now = false;
  b.pos = b_start_override
              ? *b_start_override
              : clamp_to_arena(place.in_disc(a.pos, acfg.sensors.knollenorgan_range_m),
                               acfg.arena);
  b.heading = place.uniform(-kPi, kPi);
  b.dominance = static_cast<double>(assay.b_dominance);
  b.speed = 0.0;
  b.eod_now = false;

  env.refresh_scene();
  auto obs = env.observe_all();
  const auto layout = env.obs_layout();
  auto ctrl_a = make_ctrl(0);
  auto ctrl_b = make_ctrl(1);
  ctrl_a->reset(layout);
  ctrl_b->reset(layout);
  Rng act_rng;
  act_rng.reseed(derive_seed(acfg.seed, 7000 + trial), 0);

  AssayTrial result;
  result.trial = trial;
  result.b_start = b.pos;
  auto in_patch = [&](const Vec2& p) {
    return (p - assay.patch_center).norm() <= assay.patch_radius_m;
  };
  if (in_patch(b.pos)) {
    result.success = true;
    result.steps_to_reach = 0;
  }

  std::vector<ActionCommand> actions(2);
  for (int s = 1; s <= assay.max_steps; ++s) {
    actions[0] = ctrl_a->act(obs[0], act_rng);
    actions[1] = ctrl_b->act(obs[1], act_rng);
    const auto res = env.step(actions);
    result.b_food += static_cast<double>(res.events.food_eaten[1].size());
    if (!result.success && in_patch(env.state().agents[1].pos)) {
      result.success = true;
      result.steps_to_reach = s;
    }
    obs = res.obs;
  }
  return result;
}

AssayCondition run_condition(const ExperimentConfig& acfg,
                             const ControllerFactory& make_ctrl, bool remove_a) {
  AssayCondition cond;
  int successes = 0;
  for (int trial = 0; trial < acfg.assay.n_trials; ++trial) {
    cond.trials.push_back(run_trial(acfg, make_ctrl, trial, remove_a, nullptr));
    if (cond.trials.back().success) successes += 1;
    cond.mean_b_food += cond.trials.back().b_food;
  }
  const double n = std::max(1, acfg.assay.n_trials);
  cond.success_rate = successes / n;
  cond.mean_b_food /= n;
  return cond;
}

}  // namespace

AssayResult run_two_fish_assay(const ExperimentConfig& cfg,
                               const ControllerFactory& make_controller) {
  ExperimentConfig acfg = cfg;
  acfg.arena.n_agents = 2;
  PatchSpec patch;
  patch.center = cfg.assay.patch_center;
  patch.radius_m = cfg.assay.patch_radius_m;
  patch.capacity = cfg.assay.patch_capacity;
  patch.replenish_prob = 1.0;  // fully replenishing
  acfg.arena.patches = {patch};
  // Episodes inside trials are bounded by max_steps, not episode_len.
  acfg.arena.episode_len = std::max(acfg.arena.episode_len, cfg.assay.max_steps + 1);

  AssayResult out;
  out.with_a = run_condition(acfg, make_controller, false);
  out.control = run_condition(acfg, make_controller, true);

  const int grid = cfg.assay.sweep_grid;
  if (grid > 0) {
    for (int iy = 0; iy < grid; ++iy) {
      for (int ix = 0; ix < grid; ++ix) {
        SweepCell cell;
        cell.ix = ix;
        cell.iy = iy;
        cell.center = {(ix + 0.5) * acfg.arena.width_m / grid,
                       (iy + 0.5) * acfg.arena.height_m / grid};
        int successes = 0;
        for (int trial = 0; trial < cfg.assay.n_trials; ++trial) {
          const auto t =
              run_trial(acfg, make_controller, trial, false, &cell.center);
          if (t.success) successes += 1;
          cell.n_trials += 1;
        }
        cell.success_rate =
            cell.n_trials > 0 ? static_cast<double>(successes) / cell.n_trials : 0.0;
        out.sweep.push_back(cell);
      }
    }
  }
  return out;
}

ControllerFactory policy_controller_factory(const PolicyParams* params,
                                            bool stochastic) {
  return [params, stochastic](int) {
    return std::make_unique<PolicyController>(params, stochastic);
  };
}

ControllerFactory scripted_assay_factory(const ArenaConfig& arena) {
  return [arena](int agent_id) -> std::unique_ptr<Controller> {
    if (agent_id == 0) return std::make_unique<BeaconController>();
    return std::make_unique<KoSeekerController>(arena);
  };
}

}  // namespace efish
