#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "efish/assay.hpp"
#include "efish/config_io.hpp"
#include "efish/env.hpp"
#include "efish/errors.hpp"

using namespace efish;

namespace {

ExperimentConfig small_config(int episode_len = 40) {
  ExperimentConfig cfg;
  cfg.arena.n_agents = 2;
  cfg.arena.episode_len = episode_len;
  PatchSpec patch;
  patch.center = {0.5, 0.5};
  patch.radius_m = 0.2;
  patch.capacity = 5;
  patch.replenish_prob = 0.05;
  cfg.arena.patches = {patch};
  finalize_config(cfg);
  return cfg;
}

std::vector<std::unique_ptr<Controller>> random_controllers(int n) {
  std::vector<std::unique_ptr<Controller>> out;
  for (int i = 0; i < n; ++i) out.push_back(std::make_unique<RandomController>());
  return out;
}

}  // namespace

TEST_CASE("record_episode fills the header and one row per agent per step") {
  const auto cfg = small_config();
  const auto ctrls = random_controllers(2);
  const auto log = record_episode(cfg, ctrls, 4242);

  CHECK(log.header.seed == 4242);
  CHECK(log.header.config_hash == cfg.config_hash);
  CHECK(log.header.dt_s == cfg.arena.dt_s);
  CHECK(log.header.n_agents == 2);
  CHECK(log.header.n_steps == 40);
  CHECK(log.header.mode == cfg.arena.competition_mode);
  CHECK(log.header.knollenorgan_enabled == cfg.sensors.knollenorgan_enabled);
  CHECK(log.header.collective_sensing_enabled == cfg.sensors.collective_sensing_enabled);
  REQUIRE(log.rows.size() == 80);

  for (int t = 0; t < 40; ++t) {
    for (int i = 0; i < 2; ++i) {
      const LogRow& r = log.at(t, i);
      CHECK(r.step == t);
      CHECK(r.agent == i);
      CHECK(r.thrust >= 0.0);
      CHECK(r.thrust <= 1.0);
      CHECK(std::abs(r.turn) <= 1.0);
      CHECK(r.x >= 0.0);
      CHECK(r.x <= cfg.arena.width_m);
      CHECK(r.y >= 0.0);
      CHECK(r.y <= cfg.arena.height_m);
      CHECK(std::isfinite(r.reward));
    }
  }
}

TEST_CASE("record_episode wants exactly one controller per agent") {
  const auto cfg = small_config();
  const auto ctrls = random_controllers(1);
  CHECK_THROWS_AS(record_episode(cfg, ctrls, 7), ContractError);
}

TEST_CASE("replay_episode reproduces a recorded episode bit-exactly") {
  const auto cfg = small_config();
  const auto ctrls = random_controllers(2);
  const auto log = record_episode(cfg, ctrls, 31337);

  const auto rep = replay_episode(cfg, log);
  CHECK(rep.rewards_match);
  CHECK(rep.states_match);
  CHECK(rep.first_mismatch_step == -1);

  SUBCASE("a tampered reward is noticed at the right step") {
    auto bad = log;
    bad.rows[10].reward += 0.5;  // t=5, agent 0
    const auto r = replay_episode(cfg, bad);
    CHECK_FALSE(r.rewards_match);
    CHECK(r.states_match);
    CHECK(r.first_mismatch_step == 5);
  }

  SUBCASE("a tampered action diverges the replayed state") {
    auto bad = log;
    LogRow& row = bad.rows[20];  // t=10, agent 0
    row.thrust = row.thrust < 0.5 ? 1.0 : 0.0;
    const auto r = replay_episode(cfg, bad);
    CHECK_FALSE(r.states_match);
    CHECK(r.first_mismatch_step == 10);
  }

  SUBCASE("a config hash mismatch is rejected") {
    auto other = cfg;
    other.rewards.c_eod *= 2.0;
    finalize_config(other);
    REQUIRE(other.config_hash != cfg.config_hash);
    CHECK_THROWS_AS(replay_episode(other, log), ConfigError);
  }
}

TEST_CASE("knollenorgan toggle changes the observation length by the bin count") {
  auto cfg_on = small_config();
  cfg_on.sensors.noise_sigma = 0.0;
  finalize_config(cfg_on);
  auto cfg_off = cfg_on;
  cfg_off.sensors.knollenorgan_enabled = false;
  finalize_config(cfg_off);

  Environment env_on(cfg_on);
  Environment env_off(cfg_off);
  const auto obs_on = env_on.reset(123);
  const auto obs_off = env_off.reset(123);

  const auto lay_on = env_on.obs_layout();
  const auto lay_off = env_off.obs_layout();
  CHECK(lay_on.n_knollenorgan == cfg_on.sensors.n_knollenorgan_bins);
  CHECK(lay_off.n_knollenorgan == 0);
  CHECK(obs_on[0].size() - obs_off[0].size() == cfg_on.sensors.n_knollenorgan_bins);

  const int pre = lay_on.knollenorgan_offset();
  const int nko = lay_on.n_knollenorgan;
  for (int i = 0; i < 2; ++i) {
    // Same world, so the electrosensory prefix and proprioception agree.
    CHECK(obs_on[i].head(pre) == obs_off[i].head(pre));
    CHECK(obs_on[i].tail(ObservationLayout::kProprioDim) ==
          obs_off[i].tail(ObservationLayout::kProprioDim));
    // Nobody has emitted yet and noise is off: the social block is silent.
    CHECK(obs_on[i].segment(pre, nko).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("a conspecific EOD lights up the enabled social block only") {
    WorldState& st = env_on.mutable_state();
    st.agents[0].pos = {0.4, 0.5};
    st.agents[1].pos = {0.6, 0.5};
    env_on.refresh_scene();
    std::vector<ActionCommand> actions(2);
    actions[1].eod = true;
    const auto res = env_on.step(actions);
    CHECK(res.obs[0].segment(pre, nko).maxCoeff() > 0.0);
  }
}

TEST_CASE("KoSeekerController turns toward the loudest bin") {
  ArenaConfig arena;
  ObservationLayout layout;
  layout.n_mormyromast = 0;
  layout.n_ampullary = 0;
  layout.n_knollenorgan = 12;
  KoSeekerController seeker(arena);
  seeker.reset(layout);
  Rng rng;
  rng.reseed(1, 0);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(layout.obs_dim());

  SUBCASE("a signal behind-left commands a hard left turn") {
    obs[11] = 1.0;  // bin centre at +11*pi/12
    const auto cmd = seeker.act(obs, rng);
    CHECK(cmd.turn == 1.0);
    CHECK(cmd.thrust == 0.2);  // big bearing: slow down while turning
  }

  SUBCASE("a signal behind-right commands a hard right turn") {
    obs[0] = 1.0;  // bin centre at -11*pi/12
    const auto cmd = seeker.act(obs, rng);
    CHECK(cmd.turn == -1.0);
    CHECK(cmd.thrust == 0.2);
  }

  SUBCASE("a near-ahead signal keeps full thrust and a small correction") {
    obs[5] = 1.0;  // bin centre at -pi/12
    const auto cmd = seeker.act(obs, rng);
    CHECK(cmd.turn < 0.0);
    CHECK(cmd.thrust == 1.0);
  }

  SUBCASE("sub-threshold signal means hold course") {
    obs[3] = 0.01;
    const auto cmd = seeker.act(obs, rng);
    CHECK(cmd.turn == 0.0);
    CHECK(cmd.thrust == 1.0);
  }

  SUBCASE("no knollenorgan channel means hold course") {
    ObservationLayout none;
    none.n_mormyromast = 4;
    KoSeekerController blind(arena);
    blind.reset(none);
    Eigen::VectorXd o = Eigen::VectorXd::Ones(none.obs_dim());
    const auto cmd = blind.act(o, rng);
    CHECK(cmd.turn == 0.0);
    CHECK(cmd.thrust == 1.0);
  }

  CHECK_FALSE(seeker.act(obs, rng).eod);
  CHECK_FALSE(seeker.act(obs, rng).bite);
}

TEST_CASE("BeaconController pings every step and stays put") {
  BeaconController beacon;
  Rng rng;
  rng.reseed(2, 0);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(5);
  for (int k = 0; k < 10; ++k) {
    const auto cmd = beacon.act(obs, rng);
    CHECK(cmd.eod);
    CHECK(cmd.thrust == 0.0);
    CHECK(cmd.turn == 0.0);
    CHECK_FALSE(cmd.bite);
  }
}

TEST_CASE("BurstyEodController alternates dense and sparse emission") {
  BurstyEodController ctrl;
  ObservationLayout layout;
  ctrl.reset(layout);
  Rng rng;
  rng.reseed(99, 0);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(layout.obs_dim());

  const int n = 6000;
  std::vector<int> eod(n);
  int total = 0;
  for (int t = 0; t < n; ++t) {
    eod[t] = ctrl.act(obs, rng).eod ? 1 : 0;
    total += eod[t];
  }
  // Stationary mix: ~1/6 of time bursting at 0.9, rest pausing at 0.02.
  CHECK(total > n / 20);
  CHECK(total < n / 3);

  int best20 = 0;
  int worst200 = n;
  int run = 0;
  for (int t = 0; t < n; ++t) {
    if (t >= 20) run -= eod[t - 20];
    run += eod[t];
    if (t >= 19) best20 = std::max(best20, run);
  }
  run = 0;
  for (int t = 0; t < n; ++t) {
    if (t >= 200) run -= eod[t - 200];
    run += eod[t];
    if (t >= 199) worst200 = std::min(worst200, run);
  }
  CHECK(best20 >= 12);   // a burst somewhere
  CHECK(worst200 <= 10); // a long pause somewhere
}

TEST_CASE("scripted two-fish assay: the beacon helps B find the patch") {
  auto cfg = small_config();
  cfg.seed = 77;
  cfg.assay.n_trials = 25;
  cfg.assay.max_steps = 200;
  cfg.assay.a_dominance = 3.0;  // a louder beacon carries across the spawn disc
  finalize_config(cfg);

  const auto res = run_two_fish_assay(cfg, scripted_assay_factory(cfg.arena));
  REQUIRE(res.with_a.trials.size() == 25);
  REQUIRE(res.control.trials.size() == 25);
  CHECK(res.sweep.empty());

  for (int i = 0; i < 25; ++i) {
    const auto& wa = res.with_a.trials[i];
    const auto& ct = res.control.trials[i];
    // Paired placement: B starts in the same spot in both conditions.
    CHECK(wa.b_start.x == ct.b_start.x);
    CHECK(wa.b_start.y == ct.b_start.y);
    CHECK(wa.trial == i);
    if (wa.success) CHECK(wa.steps_to_reach >= 0);
    else CHECK(wa.steps_to_reach == -1);
    CHECK(wa.b_food >= 0.0);
  }
  CHECK(res.with_a.success_rate >= res.control.success_rate + 0.2);
  CHECK(res.with_a.mean_b_food >= res.control.mean_b_food);

  // Same seed, same outcome.
  const auto again = run_two_fish_assay(cfg, scripted_assay_factory(cfg.arena));
  CHECK(again.with_a.success_rate == res.with_a.success_rate);
  CHECK(again.control.success_rate == res.control.success_rate);
}

TEST_CASE("assay sweep scores success per start cell") {
  auto cfg = small_config();
  cfg.seed = 11;
  cfg.assay.n_trials = 3;
  cfg.assay.sweep_grid = 3;
  // Too few steps to cross from a corner cell to the patch.
  cfg.assay.max_steps = 30;
  finalize_config(cfg);
  const double reach = cfg.assay.max_steps * cfg.arena.v_max_mps * cfg.arena.dt_s;
  const double corner_gap =
      std::hypot(0.5 - 1.0 / 6.0, 0.5 - 1.0 / 6.0) - cfg.assay.patch_radius_m;
  REQUIRE(reach < corner_gap);

  const auto res = run_two_fish_assay(cfg, scripted_assay_factory(cfg.arena));
  REQUIRE(res.sweep.size() == 9);
  for (const auto& cell : res.sweep) {
    CHECK(cell.n_trials == 3);
    CHECK(cell.center.x == (cell.ix + 0.5) * cfg.arena.width_m / 3);
    CHECK(cell.center.y == (cell.iy + 0.5) * cfg.arena.height_m / 3);
    const bool corner = (cell.ix != 1) && (cell.iy != 1);
    if (cell.ix == 1 && cell.iy == 1) CHECK(cell.success_rate == 1.0);
    if (corner) CHECK(cell.success_rate == 0.0);
  }
}

TEST_CASE("policy_controller_factory drives agents with a shared policy") {
  const auto cfg = small_config();
  Environment env(cfg);
  env.reset(5);
  const auto layout = env.obs_layout();
  Rng rng;
  rng.reseed(8, 0);
  const auto params = PolicyParams::init(layout.obs_dim(), 8, rng);

  const auto factory = policy_controller_factory(&params, false);
  auto ctrl = factory(0);
  ctrl->reset(layout);
  Eigen::VectorXd obs = Eigen::VectorXd::Constant(layout.obs_dim(), 0.1);

  Rng act;
  act.reseed(9, 0);
  const auto c1 = ctrl->act(obs, act);
  const auto c2 = ctrl->act(obs, act);
  ctrl->reset(layout);
  const auto c3 = ctrl->act(obs, act);

  // Deterministic controller: same hidden state, same action.
  CHECK(c1.thrust == c3.thrust);
  CHECK(c1.turn == c3.turn);
  CHECK(c1.eod == c3.eod);
  // The recurrent state advanced between the first two calls.
  const bool moved = c1.thrust != c2.thrust || c1.turn != c2.turn;
  CHECK(moved);
  CHECK(c1.thrust >= 0.0);
  CHECK(c1.thrust <= 1.0);
  CHECK(std::abs(c1.turn) <= 1.0);

  auto stoch = policy_controller_factory(&params, true)(1);
  stoch->reset(layout);
  const auto s1 = stoch->act(obs, act);
  CHECK(s1.thrust >= 0.0);
  CHECK(s1.thrust <= 1.0);
  CHECK(std::abs(s1.turn) <= 1.0);
}
