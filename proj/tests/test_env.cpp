#include <cmath>
#include <vector>

#include <doctest.h>

#include "efish/config_io.hpp"
#include "efish/env.hpp"
#include "efish/errors.hpp"

using namespace efish;

// The reward structure is exactly these four scalars; nothing rewards
// proximity, coordination, or another agent's outcomes.
static_assert(sizeof(RewardConfig) == 4 * sizeof(double),
              "RewardConfig must stay food/eod/bite-penalty only");

namespace {

AgentState make_agent(int id, Vec2 pos, double heading, double dominance = 1.0) {
  AgentState a;
  a.id = id;
  a.pos = pos;
  a.heading = heading;
  a.dominance = dominance;
  return a;
}

ActionCommand act(double thrust, double turn, bool eod = false, bool bite = false) {
  return {thrust, turn, eod, bite};
}

}  // namespace

TEST_CASE("kinematics: null action is a fixed point") {
  ArenaConfig cfg;
  const auto a = make_agent(0, {0.4, 0.6}, 1.1);
  const auto res = apply_kinematics(a, act(0.0, 0.0), cfg);
  CHECK(res.agent.pos == a.pos);
  CHECK(res.agent.heading == doctest::Approx(1.1));
  CHECK(res.agent.speed == 0.0);
  CHECK_FALSE(res.wall_contact);
}

TEST_CASE("kinematics: full thrust ahead moves v_max * dt") {
  ArenaConfig cfg;  // v_max = 0.2, dt = 0.04
  const auto a = make_agent(0, {0.5, 0.5}, 0.0);
  const auto res = apply_kinematics(a, act(1.0, 0.0), cfg);
  CHECK(res.agent.pos.x == doctest::Approx(0.508).epsilon(1e-12));  // += 0.008 m
  CHECK(res.agent.pos.y == doctest::Approx(0.5));
  CHECK(res.agent.speed == doctest::Approx(0.2));
  CHECK_FALSE(res.wall_contact);
}

TEST_CASE("kinematics: turning happens before the move") {
  ArenaConfig cfg;  // omega_max = pi
  const auto a = make_agent(0, {0.5, 0.5}, 0.0);
  // Quarter turn worth of dt: heading' = pi * 0.04 = 0.1257 rad.
  const auto res = apply_kinematics(a, act(1.0, 1.0), cfg);
  const double h = kPi * cfg.dt_s;
  CHECK(res.agent.heading == doctest::Approx(h));
  CHECK(res.agent.pos.x == doctest::Approx(0.5 + 0.008 * std::cos(h)));
  CHECK(res.agent.pos.y == doctest::Approx(0.5 + 0.008 * std::sin(h)));
}

TEST_CASE("kinematics: wall clamp raises a contact event") {
  ArenaConfig cfg;
  const auto a = make_agent(0, {cfg.width_m, 0.5}, 0.0);  // at the east wall
  const auto res = apply_kinematics(a, act(1.0, 0.0), cfg);
  CHECK(res.agent.pos.x == doctest::Approx(cfg.width_m));
  CHECK(res.wall_contact);

  const auto b = make_agent(0, {0.003, 0.5}, kPi);  // heading west, near x = 0
  const auto res2 = apply_kinematics(b, act(1.0, 0.0), cfg);
  CHECK(res2.agent.pos.x == doctest::Approx(0.0));
  CHECK(res2.wall_contact);
}

TEST_CASE("update_food: in-range consumption and index bookkeeping") {
  ArenaConfig cfg;
  cfg.patches = {PatchSpec{}};
  cfg.patches[0].replenish_prob = 0.0;
  WorldState state;
  state.agents = {make_agent(0, {0.5, 0.5}, 0.0)};
  FoodItem item;
  item.pos = {0.51, 0.5};  // 0.01 m away, eat_range 0.03
  state.food = {item};
  StepEvents events(1);
  update_food(state, cfg, events);
  CHECK_FALSE(state.food[0].active);
  CHECK(state.agents[0].food_eaten == 1);
  REQUIRE(events.food_eaten[0].size() == 1);
  CHECK(events.food_eaten[0][0] == 0);
}

TEST_CASE("update_food: equidistant tie goes to the lower id") {
  ArenaConfig cfg;
  cfg.patches = {PatchSpec{}};
  cfg.patches[0].replenish_prob = 0.0;
  WorldState state;
  // Exactly representable symmetric offsets: both 1/32 m from the item.
  state.agents = {make_agent(0, {0.5 + 0.03125, 0.5}, 0.0),
                  make_agent(1, {0.5 - 0.03125, 0.5}, 0.0)};
  cfg.eat_range_m = 0.05;
  FoodItem item;
  item.pos = {0.5, 0.5};
  state.food = {item};
  StepEvents events(2);
  update_food(state, cfg, events);
  CHECK(events.food_eaten[0].size() == 1);
  CHECK(events.food_eaten[1].empty());
  CHECK(state.agents[0].food_eaten == 1);
  CHECK(state.agents[1].food_eaten == 0);
}

TEST_CASE("update_food: certain replenishment restores the patch") {
  ArenaConfig cfg;
  cfg.patches = {PatchSpec{}};
  cfg.patches[0].replenish_prob = 1.0;
  WorldState state;
  state.rng.reseed(4, 0);
  state.agents = {make_agent(0, {0.9, 0.9}, 0.0)};
  for (int i = 0; i < 5; ++i) {
    FoodItem f;
    f.pos = {0.5, 0.5};
    f.active = i >= 2;  // 2 of 5 eaten earlier
    state.food.push_back(f);
  }
  StepEvents events(1);
  update_food(state, cfg, events);
  int active = 0;
  for (const auto& f : state.food) active += f.active ? 1 : 0;
  CHECK(active == 5);
  // Replenished items land inside their patch disc.
  for (const auto& f : state.food)
    CHECK((f.pos - cfg.patches[0].center).norm() <= cfg.patches[0].radius_m + 1e-12);
}

TEST_CASE("resolve_bites: range, cone, and nearest-target selection") {
  ArenaConfig cfg;  // bite_range 0.1
  WorldState state;
  state.agents = {make_agent(0, {0.5, 0.5}, 0.0), make_agent(1, {0.55, 0.5}, 0.0)};
  std::vector<ActionCommand> actions = {act(0, 0, false, true), act(0, 0)};
  StepEvents ev(2);
  resolve_bites(state, actions, cfg, ev);
  REQUIRE(ev.bites_delivered[0].size() == 1);
  CHECK(ev.bites_delivered[0][0] == 1);
  REQUIRE(ev.bites_received[1].size() == 1);
  CHECK(ev.bites_received[1][0] == 0);

  // Out of range: no event.
  state.agents[1].pos = {0.7, 0.5};
  StepEvents ev2(2);
  resolve_bites(state, actions, cfg, ev2);
  CHECK(ev2.bites_delivered[0].empty());

  // Behind the biter (outside the +-60 degree cone): no event.
  state.agents[1].pos = {0.45, 0.5};
  StepEvents ev3(2);
  resolve_bites(state, actions, cfg, ev3);
  CHECK(ev3.bites_delivered[0].empty());

  // Two candidates in the cone: the nearer one is bitten.
  state.agents = {make_agent(0, {0.5, 0.5}, 0.0), make_agent(1, {0.58, 0.5}, 0.0),
                  make_agent(2, {0.54, 0.5}, 0.0)};
  std::vector<ActionCommand> actions3 = {act(0, 0, false, true), act(0, 0), act(0, 0)};
  StepEvents ev4(3);
  resolve_bites(state, actions3, cfg, ev4);
  REQUIRE(ev4.bites_delivered[0].size() == 1);
  CHECK(ev4.bites_delivered[0][0] == 2);  // 0.04 m beats 0.08 m
}

TEST_CASE("rewards: food, eod cost, and the dominance asymmetry") {
  RewardConfig rcfg;  // r_food 1, c_eod 0.01, p_small 0.1, p_big 1.0
  WorldState state;
  state.agents = {make_agent(0, {0, 0}, 0, 3.0), make_agent(1, {0, 0}, 0, 1.0)};

  StepEvents none(2);
  auto r = compute_rewards(none, state, rcfg);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);

  StepEvents fed(2);
  fed.food_eaten[0] = {4};
  fed.eods[0] = 1;
  r = compute_rewards(fed, state, rcfg);
  CHECK(r[0] == doctest::Approx(0.99));  // 1 food - 1 EOD cost

  // Dominant (3) bites subordinate (1): biter -p_small, bitten -p_big.
  StepEvents dom(2);
  dom.bites_delivered[0] = {1};
  dom.bites_received[1] = {0};
  r = compute_rewards(dom, state, rcfg);
  CHECK(r[0] == doctest::Approx(-0.1));
  CHECK(r[1] == doctest::Approx(-1.0));

  // Subordinate bites dominant (and equal dominance behaves the same way).
  StepEvents sub(2);
  sub.bites_delivered[1] = {0};
  sub.bites_received[0] = {1};
  r = compute_rewards(sub, state, rcfg);
  CHECK(r[1] == doctest::Approx(-1.0));
  CHECK(r[0] == doctest::Approx(-0.1));
}

TEST_CASE("rewards decompose per event and ignore other agents' food") {
  RewardConfig rcfg;
  WorldState state;
  state.agents = {make_agent(0, {0, 0}, 0, 2.0), make_agent(1, {0, 0}, 0, 2.0),
                  make_agent(2, {0, 0}, 0, 1.0)};
  StepEvents ev(3);
  ev.food_eaten[0] = {1, 5};
  ev.eods[0] = 1;
  ev.eods[2] = 1;
  ev.bites_delivered[0] = {2};
  ev.bites_received[2] = {0};
  const auto r = compute_rewards(ev, state, rcfg);
  // Recompute each term independently.
  CHECK(r[0] == doctest::Approx(2.0 * 1.0 - 0.01 - 0.1));
  CHECK(r[1] == doctest::Approx(0.0));
  CHECK(r[2] == doctest::Approx(-0.01 - 1.0));

  // Inflating agent 0's haul leaves everyone else untouched.
  StepEvents more = ev;
  more.food_eaten[0] = {1, 5, 7, 9};
  const auto r2 = compute_rewards(more, state, rcfg);
  CHECK(r2[1] == r[1]);
  CHECK(r2[2] == r[2]);
  CHECK(r2[0] == doctest::Approx(r[0] + 2.0));
}

TEST_CASE("reset_env fills patches, seeds deterministically, and separates agents") {
  ArenaConfig cfg;
  cfg.n_agents = 1;
  cfg.patches = {PatchSpec{}};
  cfg.patches[0].capacity = 5;
  const auto s = reset_env(cfg, 7);
  CHECK(s.t == 0);
  REQUIRE(s.food.size() == 5);
  for (const auto& f : s.food) CHECK(f.active);
  CHECK(s.agents.size() == 1);

  // Same seed: bit-identical placement. Different seed: different placement.
  const auto s2 = reset_env(cfg, 7);
  CHECK(s.agents[0].pos == s2.agents[0].pos);
  CHECK(s.agents[0].heading == s2.agents[0].heading);
  for (std::size_t i = 0; i < s.food.size(); ++i) CHECK(s.food[i].pos == s2.food[i].pos);

  cfg.n_agents = 4;
  const auto a7 = reset_env(cfg, 7);
  const auto a8 = reset_env(cfg, 8);
  bool moved = false;
  for (int i = 0; i < 4; ++i) {
    moved |= !(a7.agents[i].pos == a8.agents[i].pos);
    CHECK(a7.agents[i].dominance >= 1.0);
    CHECK(a7.agents[i].dominance <= 3.0);
  }
  CHECK(moved);

  // Minimum separation of 2 body lengths holds pairwise.
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      CHECK((a7.agents[i].pos - a7.agents[j].pos).norm() >= 2.0 * cfg.body_length_m);
}

TEST_CASE("reset_env rejects arenas too small for the population") {
  ArenaConfig cfg;
  cfg.width_m = 0.3;
  cfg.height_m = 0.3;
  cfg.n_agents = 6;  // cannot fit 6 agents at 0.2 m separation
  cfg.patches = {PatchSpec{}};
  CHECK_THROWS_AS(reset_env(cfg, 1), ConfigError);
}

TEST_CASE("environment step enforces the action-count contract") {
  auto cfg = parse_config_text(R"({"arena": {"n_agents": 2, "episode_len": 4}})");
  Environment env(cfg);
  env.reset(1);
  std::vector<ActionCommand> too_few(1);
  CHECK_THROWS_AS(env.step(too_few), ContractError);
}

TEST_CASE("episode horizon: done rises exactly at episode_len") {
  auto cfg = parse_config_text(R"({"arena": {"n_agents": 1, "episode_len": 1}})");
  Environment env(cfg);
  env.reset(3);
  const auto res = env.step({act(0.3, 0.1)});
  CHECK(res.done);

  auto cfg2 = parse_config_text(R"({"arena": {"n_agents": 1, "episode_len": 3}})");
  Environment env2(cfg2);
  env2.reset(3);
  CHECK_FALSE(env2.step({act(0, 0)}).done);
  CHECK_FALSE(env2.step({act(0, 0)}).done);
  CHECK(env2.step({act(0, 0)}).done);
}

TEST_CASE("null actions with no food in range are a reward-free fixed point") {
  auto cfg = parse_config_text(R"({
    "arena": {"n_agents": 2, "episode_len": 8,
              "patches": [{"capacity": 0}]}
  })");
  Environment env(cfg);
  env.reset(11);
  const auto before0 = env.state().agents[0].pos;
  const auto before1 = env.state().agents[1].pos;
  const auto res = env.step({act(0, 0), act(0, 0)});
  CHECK(res.rewards[0] == 0.0);
  CHECK(res.rewards[1] == 0.0);
  CHECK(env.state().agents[0].pos == before0);
  CHECK(env.state().agents[1].pos == before1);
}

TEST_CASE("competition with zero replenishment is zero-sum over food") {
  auto cfg = parse_config_text(R"({
    "arena": {"n_agents": 3, "episode_len": 400,
              "competition_mode": "competition",
              "patches": [{"capacity": 6, "radius_m": 0.3}]}
  })");
  Environment env(cfg);
  env.reset(21);
  const int initial = static_cast<int>(env.state().food.size());
  Rng rng(99);
  std::vector<ActionCommand> actions(3);
  int eaten = 0;
  for (int t = 0; t < 400; ++t) {
    for (auto& a : actions)
      a = act(rng.uniform(), rng.uniform(-1.0, 1.0), rng.bernoulli(0.2), false);
    const auto res = env.step(actions);
    for (int i = 0; i < 3; ++i) {
      eaten += static_cast<int>(res.events.food_eaten[i].size());
      // Positions stay in bounds after every step.
      const auto& p = env.state().agents[i].pos;
      CHECK(p.x >= 0.0);
      CHECK(p.x <= cfg.arena.width_m);
      CHECK(p.y >= 0.0);
      CHECK(p.y <= cfg.arena.height_m);
    }
    if (res.done) break;
  }
  CHECK(eaten <= initial);
}

TEST_CASE("identical seed and actions reproduce the trajectory bit-exactly") {
  auto cfg = parse_config_text(R"({"arena": {"n_agents": 2, "episode_len": 64}})");
  auto run = [&] {
    Environment env(cfg);
    env.reset(77);
    Rng rng(5);
    std::vector<std::vector<double>> track;
    std::vector<ActionCommand> actions(2);
    for (int t = 0; t < 64; ++t) {
      for (auto& a : actions)
        a = act(rng.uniform(), rng.uniform(-1.0, 1.0), rng.bernoulli(0.3),
                rng.bernoulli(0.1));
      const auto res = env.step(actions);
      for (int i = 0; i < 2; ++i)
        track.push_back({env.state().agents[i].pos.x, env.state().agents[i].pos.y,
                         env.state().agents[i].heading, res.rewards[i],
                         res.obs[i].sum()});
    }
    return track;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k) CHECK(a[i][k] == b[i][k]);
}

TEST_CASE("dead agents read zero observations and take no actions") {
  auto cfg = parse_config_text(R"({"arena": {"n_agents": 2, "episode_len": 16}})");
  Environment env(cfg);
  env.reset(9);
  env.mutable_state().agents[1].alive = false;
  env.refresh_scene();
  const auto res = env.step({act(0.5, 0.0, true), act(1.0, 1.0, true, true)});
  CHECK(res.obs[1].norm() == doctest::Approx(0.0));
  CHECK(res.obs[1].size() == env.obs_layout().obs_dim());
  CHECK_FALSE(env.state().agents[1].eod_now);
  CHECK(res.events.eods[1] == 0);
}
