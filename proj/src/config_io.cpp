#include "efish/config_io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "efish/errors.hpp"

namespace efish {
namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("config: `" + path + "` must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!known.count(item.key()))
      throw ConfigError("config: unknown key `" + path + (path.empty() ? "" : ".") +
                        item.key() + "`");
  }
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) it->get_to(out);
}

void get_vec2(const json& obj, const char* key, const std::string& path, Vec2& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array() || it->size() != 2)
    throw ConfigError("config: `" + path + "." + key + "` must be [x, y]");
  out.x = (*it)[0].get<double>();
  out.y = (*it)[1].get<double>();
}

CompetitionMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "competition") return CompetitionMode::Competition;
  if (s == "no_competition") return CompetitionMode::NoCompetition;
  throw ConfigError("config: `" + path +
                    "` must be \"competition\" or \"no_competition\", got \"" + s + "\"");
}

const char* mode_name(CompetitionMode m) {
  return m == CompetitionMode::Competition ? "competition" : "no_competition";
}

void parse_arena(const json& j, ArenaConfig& a) {
  require_keys(j, "arena",
               {"width_m", "height_m", "dt_s", "episode_len", "n_agents",
                "competition_mode", "patches", "bite_range_m", "eat_range_m",
                "v_max_mps", "omega_max_rps", "body_length_m"});
  get_to(j, "width_m", a.width_m);
  get_to(j, "height_m", a.height_m);
  get_to(j, "dt_s", a.dt_s);
  get_to(j, "episode_len", a.episode_len);
  get_to(j, "n_agents", a.n_agents);
  if (auto it = j.find("competition_mode"); it != j.end())
    a.competition_mode = parse_mode(it->get<std::string>(), "arena.competition_mode");
  if (auto it = j.find("patches"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config: `arena.patches` must be an array");
    a.patches.clear();
    int idx = 0;
    for (const auto& pj : *it) {
      const std::string path = "arena.patches[" + std::to_string(idx++) + "]";
      require_keys(pj, path,
                   {"center", "radius_m", "capacity", "replenish_prob",
                    "food_radius_m", "polarizability"});
      PatchSpec p;
      get_vec2(pj, "center", path, p.center);
      get_to(pj, "radius_m", p.radius_m);
      get_to(pj, "capacity", p.capacity);
      get_to(pj, "replenish_prob", p.replenish_prob);
      get_to(pj, "food_radius_m", p.food_radius_m);
      get_to(pj, "polarizability", p.polarizability);
      a.patches.push_back(p);
    }
  }
  get_to(j, "bite_range_m", a.bite_range_m);
  get_to(j, "eat_range_m", a.eat_range_m);
  get_to(j, "v_max_mps", a.v_max_mps);
  get_to(j, "omega_max_rps", a.omega_max_rps);
  get_to(j, "body_length_m", a.body_length_m);
}

void parse_field(const json& j, FieldConfig& f) {
  require_keys(j, "field",
               {"r_min_m", "k_wall", "eod_moment_base", "background_amp",
                "background_period_s", "background_dir_rad"});
  get_to(j, "r_min_m", f.r_min_m);
  get_to(j, "k_wall", f.k_wall);
  get_to(j, "eod_moment_base", f.eod_moment_base);
  get_to(j, "background_amp", f.background_amp);
  get_to(j, "background_period_s", f.background_period_s);
  get_to(j, "background_dir_rad", f.background_dir_rad);
}

void parse_sensors(const json& j, SensorLayout& s) {
  require_keys(j, "sensors",
               {"n_mormyromast", "n_ampullary", "n_knollenorgan_bins",
                "knollenorgan_range_m", "knollenorgan_enabled",
                "collective_sensing_enabled", "noise_sigma", "ampullary_tau_s"});
  get_to(j, "n_mormyromast", s.n_mormyromast);
  get_to(j, "n_ampullary", s.n_ampullary);
  get_to(j, "n_knollenorgan_bins", s.n_knollenorgan_bins);
  get_to(j, "knollenorgan_range_m", s.knollenorgan_range_m);
  get_to(j, "knollenorgan_enabled", s.knollenorgan_enabled);
  get_to(j, "collective_sensing_enabled", s.collective_sensing_enabled);
  get_to(j, "noise_sigma", s.noise_sigma);
  get_to(j, "ampullary_tau_s", s.ampullary_tau_s);
}

void parse_rewards(const json& j, RewardConfig& r) {
  require_keys(j, "rewards", {"r_food", "c_eod", "p_small", "p_big"});
  get_to(j, "r_food", r.r_food);
  get_to(j, "c_eod", r.c_eod);
  get_to(j, "p_small", r.p_small);
  get_to(j, "p_big", r.p_big);
}

void parse_policy(const json& j, PolicyConfig& p) {
  require_keys(j, "policy", {"hidden_dim"});
  get_to(j, "hidden_dim", p.hidden_dim);
}

void parse_training(const json& j, TrainConfig& t) {
  require_keys(j, "training",
               {"gamma", "gae_lambda", "clip_eps", "epochs", "seg_len",
                "n_minibatches", "learning_rate", "entropy_coef", "value_coef",
                "max_grad_norm", "total_env_steps", "n_envs", "rollout_steps",
                "checkpoint_interval", "threads", "centralized_critic"});
  get_to(j, "gamma", t.gamma);
  get_to(j, "gae_lambda", t.gae_lambda);
  get_to(j, "clip_eps", t.clip_eps);
  get_to(j, "epochs", t.epochs);
  get_to(j, "seg_len", t.seg_len);
  get_to(j, "n_minibatches", t.n_minibatches);
  get_to(j, "learning_rate", t.learning_rate);
  get_to(j, "entropy_coef", t.entropy_coef);
  get_to(j, "value_coef", t.value_coef);
  get_to(j, "max_grad_norm", t.max_grad_norm);
  get_to(j, "total_env_steps", t.total_env_steps);
  get_to(j, "n_envs", t.n_envs);
  get_to(j, "rollout_steps", t.rollout_steps);
  get_to(j, "checkpoint_interval", t.checkpoint_interval);
  get_to(j, "threads", t.threads);
  get_to(j, "centralized_critic", t.centralized_critic);
}

void parse_assay(const json& j, AssayConfig& a) {
  require_keys(j, "assay",
               {"patch_center", "patch_radius_m", "patch_capacity", "a_dominance",
                "b_dominance", "n_trials", "max_steps", "remove_a", "sweep_grid"});
  get_vec2(j, "patch_center", "assay", a.patch_center);
  get_to(j, "patch_radius_m", a.patch_radius_m);
  get_to(j, "patch_capacity", a.patch_capacity);
  get_to(j, "a_dominance", a.a_dominance);
  get_to(j, "b_dominance", a.b_dominance);
  get_to(j, "n_trials", a.n_trials);
  get_to(j, "max_steps", a.max_steps);
  get_to(j, "remove_a", a.remove_a);
  get_to(j, "sweep_grid", a.sweep_grid);
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

json to_canonical_json(const ExperimentConfig& c) {
  json j;
  j["arena"] = {
      {"width_m", c.arena.width_m},
      {"height_m", c.arena.height_m},
      {"dt_s", c.arena.dt_s},
      {"episode_len", c.arena.episode_len},
      {"n_agents", c.arena.n_agents},
      {"competition_mode", mode_name(c.arena.competition_mode)},
      {"bite_range_m", c.arena.bite_range_m},
      {"eat_range_m", c.arena.eat_range_m},
      {"v_max_mps", c.arena.v_max_mps},
      {"omega_max_rps", c.arena.omega_max_rps},
      {"body_length_m", c.arena.body_length_m},
  };
  json patches = json::array();
  for (const auto& p : c.arena.patches) {
    patches.push_back({{"center", {p.center.x, p.center.y}},
                       {"radius_m", p.radius_m},
                       {"capacity", p.capacity},
                       {"replenish_prob", p.replenish_prob},
                       {"food_radius_m", p.food_radius_m},
                       {"polarizability", p.polarizability}});
  }
  j["arena"]["patches"] = patches;
  j["field"] = {
      {"r_min_m", c.field.r_min_m},
      {"k_wall", c.field.k_wall},
      {"eod_moment_base", c.field.eod_moment_base},
      {"background_amp", c.field.background_amp},
      {"background_period_s", c.field.background_period_s},
      {"background_dir_rad", c.field.background_dir_rad},
  };
  j["sensors"] = {
      {"n_mormyromast", c.sensors.n_mormyromast},
      {"n_ampullary", c.sensors.n_ampullary},
      {"n_knollenorgan_bins", c.sensors.n_knollenorgan_bins},
      {"knollenorgan_range_m", c.sensors.knollenorgan_range_m},
      {"knollenorgan_enabled", c.sensors.knollenorgan_enabled},
      {"collective_sensing_enabled", c.sensors.collective_sensing_enabled},
      {"noise_sigma", c.sensors.noise_sigma},
      {"ampullary_tau_s", c.sensors.ampullary_tau_s},
  };
  j["rewards"] = {
      {"r_food", c.rewards.r_food},
      {"c_eod", c.rewards.c_eod},
      {"p_small", c.rewards.p_small},
      {"p_big", c.rewards.p_big},
  };
  j["policy"] = {{"hidden_dim", c.policy.hidden_dim}};
  j["training"] = {
      {"gamma", c.training.gamma},
      {"gae_lambda", c.training.gae_lambda},
      {"clip_eps", c.training.clip_eps},
      {"epochs", c.training.epochs},
      {"seg_len", c.training.seg_len},
      {"n_minibatches", c.training.n_minibatches},
      {"learning_rate", c.training.learning_rate},
      {"entropy_coef", c.training.entropy_coef},
      {"value_coef", c.training.value_coef},
      {"max_grad_norm", c.training.max_grad_norm},
      {"total_env_steps", c.training.total_env_steps},
      {"n_envs", c.training.n_envs},
      {"rollout_steps", c.training.rollout_steps},
      {"checkpoint_interval", c.training.checkpoint_interval},
      {"threads", c.training.threads},
      {"centralized_critic", c.training.centralized_critic},
  };
  j["assay"] = {
      {"patch_center", {c.assay.patch_center.x, c.assay.patch_center.y}},
      {"patch_radius_m", c.assay.patch_radius_m},
      {"patch_capacity", c.assay.patch_capacity},
      {"a_dominance", c.assay.a_dominance},
      {"b_dominance", c.assay.b_dominance},
      {"n_trials", c.assay.n_trials},
      {"max_steps", c.assay.max_steps},
      {"remove_a", c.assay.remove_a},
      {"sweep_grid", c.assay.sweep_grid},
  };
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void finalize_config(ExperimentConfig& c) {
  auto& a = c.arena;
  check(a.width_m > 0.0, "`arena.width_m` must be > 0");
  check(a.height_m > 0.0, "`arena.height_m` must be > 0");
  check(a.dt_s > 0.0, "`arena.dt_s` must be > 0");
  check(a.episode_len >= 1, "`arena.episode_len` must be >= 1");
  check(a.n_agents >= 1, "`arena.n_agents` must be >= 1");
  check(a.v_max_mps > 0.0, "`arena.v_max_mps` must be > 0");
  check(a.omega_max_rps > 0.0, "`arena.omega_max_rps` must be > 0");
  check(a.body_length_m > 0.0, "`arena.body_length_m` must be > 0");
  check(a.bite_range_m >= 0.0, "`arena.bite_range_m` must be >= 0");
  check(a.eat_range_m >= 0.0, "`arena.eat_range_m` must be >= 0");

  if (a.patches.empty()) a.patches.push_back(PatchSpec{});
  int pi = 0;
  for (auto& p : a.patches) {
    const std::string path = "arena.patches[" + std::to_string(pi++) + "]";
    check(p.radius_m > 0.0, "`" + path + ".radius_m` must be > 0");
    check(p.capacity >= 0, "`" + path + ".capacity` must be >= 0");
    if (p.replenish_prob < 0.0) {
      p.replenish_prob =
          a.competition_mode == CompetitionMode::NoCompetition ? 1.0 : 0.0;
    }
    check(p.replenish_prob >= 0.0 && p.replenish_prob <= 1.0,
          "`" + path + ".replenish_prob` must be in [0, 1]");
    check(p.food_radius_m > 0.0, "`" + path + ".food_radius_m` must be > 0");
  }

  check(c.field.r_min_m > 0.0, "`field.r_min_m` must be > 0");
  check(c.field.background_period_s > 0.0, "`field.background_period_s` must be > 0");

  auto& s = c.sensors;
  check(s.n_mormyromast >= 1, "`sensors.n_mormyromast` must be >= 1");
  check(s.n_ampullary >= 1, "`sensors.n_ampullary` must be >= 1");
  check(s.n_knollenorgan_bins >= 1, "`sensors.n_knollenorgan_bins` must be >= 1");
  check(s.knollenorgan_range_m > 0.0, "`sensors.knollenorgan_range_m` must be > 0");
  check(s.noise_sigma >= 0.0, "`sensors.noise_sigma` must be >= 0");
  check(s.ampullary_tau_s > 0.0, "`sensors.ampullary_tau_s` must be > 0");

  check(c.policy.hidden_dim >= 1, "`policy.hidden_dim` must be >= 1");

  auto& t = c.training;
  check(t.gamma >= 0.0 && t.gamma <= 1.0, "`training.gamma` must be in [0, 1]");
  check(t.gae_lambda >= 0.0 && t.gae_lambda <= 1.0,
        "`training.gae_lambda` must be in [0, 1]");
  check(t.clip_eps > 0.0, "`training.clip_eps` must be > 0");
  check(t.epochs >= 1, "`training.epochs` must be >= 1");
  check(t.seg_len >= 1, "`training.seg_len` must be >= 1");
  check(t.rollout_steps >= 1, "`training.rollout_steps` must be >= 1");
  check(t.rollout_steps % t.seg_len == 0,
        "`training.seg_len` must divide `training.rollout_steps`");
  check(t.n_minibatches >= 1, "`training.n_minibatches` must be >= 1");
  check(t.n_envs >= 1, "`training.n_envs` must be >= 1");
  check(t.total_env_steps >= 1, "`training.total_env_steps` must be >= 1");
  check(t.checkpoint_interval >= 1, "`training.checkpoint_interval` must be >= 1");
  check(t.threads >= 1, "`training.threads` must be >= 1");
  check(!t.centralized_critic,
        "`training.centralized_critic` is a reserved flag; only false is supported");

  auto& y = c.assay;
  check(y.patch_radius_m > 0.0, "`assay.patch_radius_m` must be > 0");
  check(y.patch_capacity >= 0, "`assay.patch_capacity` must be >= 0");
  check(y.n_trials >= 1, "`assay.n_trials` must be >= 1");
  check(y.max_steps >= 1, "`assay.max_steps` must be >= 1");
  check(y.sweep_grid >= 0, "`assay.sweep_grid` must be >= 0");

  a.seed = c.seed;
  c.config_hash = compute_config_hash(c);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  // Whitespace-only input means "all defaults".
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: syntax error: ") + e.what());
    }
    require_keys(j, "",
                 {"arena", "field", "sensors", "rewards", "policy", "training",
                  "assay", "output_dir", "seed"});
    try {
      if (j.contains("arena")) parse_arena(j["arena"], cfg.arena);
      if (j.contains("field")) parse_field(j["field"], cfg.field);
      if (j.contains("sensors")) parse_sensors(j["sensors"], cfg.sensors);
      if (j.contains("rewards")) parse_rewards(j["rewards"], cfg.rewards);
      if (j.contains("policy")) parse_policy(j["policy"], cfg.policy);
      if (j.contains("training")) parse_training(j["training"], cfg.training);
      if (j.contains("assay")) parse_assay(j["assay"], cfg.assay);
      get_to(j, "output_dir", cfg.output_dir);
      get_to(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value type: ") + e.what());
    }
  }
  finalize_config(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open `" + path + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  // nlohmann keeps object keys sorted, so dump() is canonical.
  return to_canonical_json(cfg).dump(2) + "\n";
}

std::uint64_t compute_config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(to_canonical_json(cfg).dump());
}

}  // namespace efish
