// efish: train / rollout / analyze / assay for the electric-fish arena.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "efish/analysis.hpp"
#include "efish/assay.hpp"
#include "efish/checkpoint.hpp"
#include "efish/config_io.hpp"
#include "efish/episode_log.hpp"
#include "efish/errors.hpp"
#include "efish/trainer.hpp"

namespace {

constexpr const char* kVersion = "efish 1.0.0";

efish::ExperimentConfig load_config(const std::string& path) {
  auto cfg = efish::parse_config(path);
  if (const char* dir = std::getenv("EFISH_OUTPUT_DIR"); dir && *dir)
    cfg.output_dir = dir;
  return cfg;
}

void check_checkpoint_compat(const efish::ExperimentConfig& cfg,
                             const efish::CheckpointMeta& meta) {
  const auto layout = efish::ObservationLayout::from(cfg.sensors);
  if (meta.obs_dim != layout.obs_dim())
    throw efish::ContractError(
        "checkpoint observation layout (" + std::to_string(meta.obs_dim) +
        ") does not match config (" + std::to_string(layout.obs_dim()) + ")");
  if (meta.config_hash != cfg.config_hash)
    std::cerr << "warning: checkpoint config hash " << std::hex << meta.config_hash
              << " differs from config hash " << cfg.config_hash << std::dec << "\n";
}

int cmd_train(const std::string& config_path) {
  auto cfg = load_config(config_path);
  efish::Trainer trainer(cfg);
  trainer.train();
  std::cout << "trained " << trainer.env_steps() << " env steps over "
            << trainer.update_index() << " updates; checkpoints in "
            << cfg.output_dir << "\n";
  return 0;
}

int cmd_rollout(const std::string& config_path, const std::string& ckpt_path,
                int episodes, std::uint64_t seed, bool deterministic, bool text,
                std::string out_dir) {
  auto cfg = load_config(config_path);
  const auto loaded = efish::load_checkpoint(ckpt_path);
  check_checkpoint_compat(cfg, loaded.meta);
  if (out_dir.empty()) out_dir = cfg.output_dir;
  std::filesystem::create_directories(out_dir);

  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<std::unique_ptr<efish::Controller>> ctrls;
    for (int a = 0; a < cfg.arena.n_agents; ++a)
      ctrls.push_back(std::make_unique<efish::PolicyController>(&loaded.params,
                                                                !deterministic));
    const std::uint64_t ep_seed = efish::derive_seed(seed, ep);
    const auto log = efish::record_episode(cfg, ctrls, ep_seed);
    std::ostringstream name;
    name << out_dir << "/episode_" << std::setw(5) << std::setfill('0') << ep
         << ".eflog";
    efish::write_episode_log(name.str(), log);
    if (text) {
      std::ofstream tsv(name.str() + ".tsv");
      efish::export_text(log, tsv);
    }
    std::cout << name.str() << "\n";
  }
  return 0;
}

std::vector<efish::EpisodeLog> load_logs(const std::vector<std::string>& paths) {
  std::vector<efish::EpisodeLog> logs;
  logs.reserve(paths.size());
  std::optional<std::uint64_t> hash;
  for (const auto& p : paths) {
    logs.push_back(efish::read_episode_log(p));
    if (!hash) hash = logs.back().header.config_hash;
    else if (*hash != logs.back().header.config_hash)
      std::cerr << "warning: " << p << " was generated under a different config\n";
  }
  return logs;
}

int cmd_analyze(const std::string& stat, const std::vector<std::string>& log_paths,
                int agent, int window, double d_motif, int l_motif, int top_k,
                const std::string& mode_filter, const std::string& ko_filter,
                const std::string& cs_filter, std::uint64_t bootstrap_seed,
                const std::string& json_out) {
  const auto logs = load_logs(log_paths);
  nlohmann::ordered_json summary;
  summary["statistic"] = stat;
  summary["n_logs"] = logs.size();

  if (stat == "spi") {
    std::cout << "log\tagent\tn_intervals\tmean_interval_s\tfit_rate\ttail_excess\n";
    auto& rows = summary["rows"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < logs.size(); ++i) {
      for (int a = 0; a < logs[i].header.n_agents; ++a) {
        if (agent >= 0 && a != agent) continue;
        const auto spi = efish::spi_distribution(logs[i], a);
        double mean = 0.0;
        for (double v : spi.intervals_s) mean += v;
        if (!spi.intervals_s.empty()) mean /= spi.intervals_s.size();
        std::cout << log_paths[i] << '\t' << a << '\t' << spi.intervals_s.size()
                  << '\t' << mean << '\t' << spi.fit_rate << '\t' << spi.tail_excess
                  << '\n';
        rows.push_back({{"log", log_paths[i]},
                        {"agent", a},
                        {"valid", spi.valid},
                        {"n_intervals", spi.intervals_s.size()},
                        {"mean_interval_s", mean},
                        {"fit_rate", spi.fit_rate},
                        {"tail_excess", spi.tail_excess}});
      }
    }
  } else if (stat == "eodrate") {
    efish::ConditionFilter filter;
    if (mode_filter == "competition") filter.mode = efish::CompetitionMode::Competition;
    else if (mode_filter == "nocompetition")
      filter.mode = efish::CompetitionMode::NoCompetition;
    else if (!mode_filter.empty())
      throw efish::ConfigError("--mode must be competition or nocompetition");
    if (ko_filter == "on") filter.knollenorgan_enabled = true;
    else if (ko_filter == "off") filter.knollenorgan_enabled = false;
    else if (!ko_filter.empty())
      throw efish::ConfigError("--knollenorgan must be on or off");
    if (cs_filter == "on") filter.collective_sensing_enabled = true;
    else if (cs_filter == "off") filter.collective_sensing_enabled = false;
    else if (!cs_filter.empty())
      throw efish::ConfigError("--collective must be on or off");

    const auto res = efish::eod_probability(logs, filter, bootstrap_seed);
    std::cout << "n_episodes\tn_eods\tn_agent_steps\trate\tci_lo\tci_hi\n";
    if (res.empty) {
      std::cout << "0\t0\t0\tnan\tnan\tnan\n";
    } else {
      std::cout << res.n_episodes << '\t' << res.n_eods << '\t' << res.n_agent_steps
                << '\t' << res.rate << '\t' << res.ci_lo << '\t' << res.ci_hi << '\n';
    }
    summary["empty"] = res.empty;
    summary["rate"] = res.rate;
    summary["ci"] = {res.ci_lo, res.ci_hi};
    summary["n_episodes"] = res.n_episodes;
  } else if (stat == "displacement") {
    const auto res = efish::displacement_stats(logs, window);
    std::cout << "# window_steps=" << res.window_steps
              << " n_windows=" << res.displacements_m.size()
              << " mean_m=" << res.mean_m << "\n";
    std::cout << "bin_lo_m\tbin_hi_m\tcount\n";
    double hi = 0.0;
    for (double d : res.displacements_m) hi = std::max(hi, d);
    const int nbins = 20;
    std::vector<int> counts(nbins, 0);
    for (double d : res.displacements_m) {
      int b = hi > 0.0 ? static_cast<int>(d / hi * nbins) : 0;
      counts[std::min(b, nbins - 1)] += 1;
    }
    for (int b = 0; b < nbins; ++b)
      std::cout << (hi * b / nbins) << '\t' << (hi * (b + 1) / nbins) << '\t'
                << counts[b] << '\n';
    summary["window_steps"] = res.window_steps;
    summary["n_windows"] = res.displacements_m.size();
    summary["mean_m"] = res.mean_m;
  } else if (stat == "theil") {
    std::cout << "log\ttheil\n";
    auto& rows = summary["rows"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < logs.size(); ++i) {
      const auto t = efish::theil_index(efish::total_food_by_agent(logs[i]));
      std::cout << log_paths[i] << '\t';
      if (t) std::cout << *t << '\n';
      else std::cout << "undefined\n";
      rows.push_back({{"log", log_paths[i]},
                      {"theil", t ? nlohmann::ordered_json(*t)
                                  : nlohmann::ordered_json(nullptr)}});
    }
  } else if (stat == "motifs") {
    const auto top = efish::mine_motifs(logs, d_motif, l_motif, top_k);
    std::cout << "rank\tcode\tcount\n";
    auto& rows = summary["rows"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < top.size(); ++i) {
      std::cout << (i + 1) << '\t' << top[i].code << '\t' << top[i].count << '\n';
      rows.push_back({{"rank", i + 1}, {"code", top[i].code}, {"count", top[i].count}});
    }
  } else {
    throw efish::ConfigError(
        "unknown statistic '" + stat +
        "' (expected spi, eodrate, displacement, theil, or motifs)");
  }

  if (!json_out.empty()) {
    std::ofstream js(json_out);
    if (!js) throw efish::IoError("cannot write summary: " + json_out);
    js << summary.dump(2) << "\n";
  }
  return 0;
}

int cmd_assay(const std::string& config_path, const std::string& ckpt_path,
              bool scripted, bool dominance_sweep) {
  auto cfg = load_config(config_path);

  std::optional<efish::LoadedCheckpoint> loaded;
  efish::ControllerFactory factory;
  if (scripted) {
    factory = efish::scripted_assay_factory(cfg.arena);
  } else {
    loaded = efish::load_checkpoint(ckpt_path);
    check_checkpoint_compat(cfg, loaded->meta);
    factory = efish::policy_controller_factory(&loaded->params, true);
  }

  auto print_result = [&](const efish::AssayResult& res) {
    std::cout << "condition\tsuccess_rate\tmean_b_food\tn_trials\n";
    std::cout << "with_a\t" << res.with_a.success_rate << '\t'
              << res.with_a.mean_b_food << '\t' << res.with_a.trials.size() << "\n";
    std::cout << "remove_a\t" << res.control.success_rate << '\t'
              << res.control.mean_b_food << '\t' << res.control.trials.size() << "\n";
    std::cout << "\ntrial\tcondition\tsuccess\tsteps_to_reach\tb_food\tb_start_x\t"
                 "b_start_y\n";
    auto rows = [&](const efish::AssayCondition& c, const char* name) {
      for (const auto& t : c.trials)
        std::cout << t.trial << '\t' << name << '\t' << (t.success ? 1 : 0) << '\t'
                  << t.steps_to_reach << '\t' << t.b_food << '\t' << t.b_start.x
                  << '\t' << t.b_start.y << '\n';
    };
    rows(res.with_a, "with_a");
    rows(res.control, "remove_a");
    if (!res.sweep.empty()) {
      std::cout << "\ncell_ix\tcell_iy\tcenter_x\tcenter_y\tn_trials\tsuccess_rate\n";
      for (const auto& c : res.sweep)
        std::cout << c.ix << '\t' << c.iy << '\t' << c.center.x << '\t' << c.center.y
                  << '\t' << c.n_trials << '\t' << c.success_rate << '\n';
    }
  };

  if (dominance_sweep) {
    std::cout << "a_dominance\tb_dominance\tsuccess_rate\tcontrol_rate\tmean_b_food\n";
    for (int ad = 1; ad <= 3; ++ad) {
      for (int bd = 1; bd <= 3; ++bd) {
        auto swept = cfg;
        swept.assay.a_dominance = ad;
        swept.assay.b_dominance = bd;
        const auto res = efish::run_two_fish_assay(swept, factory);
        std::cout << ad << '\t' << bd << '\t' << res.with_a.success_rate << '\t'
                  << res.control.success_rate << '\t' << res.with_a.mean_b_food
                  << '\n';
      }
    }
    return 0;
  }

  print_result(efish::run_two_fish_assay(cfg, factory));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"electric-fish arena: simulation, training, and analysis"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(0, 1);

  std::string config_path, ckpt_path, stat, json_out, out_dir;
  std::vector<std::string> log_paths;
  int episodes = 1, agent = -1, window = 9, l_motif = 4, top_k = 6;
  double d_motif = 0.15;
  std::uint64_t seed = 1, bootstrap_seed = 12345;
  bool deterministic = false, text = false, scripted = false, dom_sweep = false;
  std::string mode_filter, ko_filter, cs_filter;

  auto* train = app.add_subcommand("train", "run PPO training from a config file");
  train->add_option("config", config_path, "experiment config (JSON)")->required();

  auto* rollout =
      app.add_subcommand("rollout", "record episodes with a trained checkpoint");
  rollout->add_option("config", config_path, "experiment config (JSON)")->required();
  rollout->add_option("checkpoint", ckpt_path, "policy checkpoint")->required();
  rollout->add_option("--episodes", episodes, "episodes to record")
      ->check(CLI::PositiveNumber);
  rollout->add_option("--seed", seed, "rollout seed");
  rollout->add_option("--out", out_dir, "output directory (default: config output_dir)");
  rollout->add_flag("--deterministic", deterministic, "mode actions instead of sampling");
  rollout->add_flag("--text", text, "also write .tsv text exports");

  auto* analyze = app.add_subcommand("analyze", "compute a statistic over episode logs");
  analyze->add_option("stat", stat, "spi | eodrate | displacement | theil | motifs")
      ->required();
  analyze->add_option("logs", log_paths, "episode log files")->required();
  analyze->add_option("--agent", agent, "restrict spi to one agent");
  analyze->add_option("--window", window, "displacement window in steps");
  analyze->add_option("--d-motif", d_motif, "motif distance threshold (m)");
  analyze->add_option("--l-motif", l_motif, "motif length (steps)");
  analyze->add_option("--top-k", top_k, "motifs to report");
  analyze->add_option("--mode", mode_filter, "competition | nocompetition");
  analyze->add_option("--knollenorgan", ko_filter, "on | off");
  analyze->add_option("--collective", cs_filter, "on | off");
  analyze->add_option("--bootstrap-seed", bootstrap_seed, "bootstrap RNG seed");
  analyze->add_option("--json", json_out, "write machine-readable summary here");

  auto* assay = app.add_subcommand("assay", "two-fish food-finding assay");
  assay->add_option("config", config_path, "experiment config (JSON)")->required();
  assay->add_option("checkpoint", ckpt_path, "policy checkpoint");
  assay->add_flag("--scripted", scripted, "use scripted beacon/seeker agents");
  assay->add_flag("--dominance-sweep", dom_sweep, "sweep dominance pairs {1,2,3}^2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(config_path);
    if (rollout->parsed())
      return cmd_rollout(config_path, ckpt_path, episodes, seed, deterministic, text,
                         out_dir);
    if (analyze->parsed())
      return cmd_analyze(stat, log_paths, agent, window, d_motif, l_motif, top_k,
                         mode_filter, ko_filter, cs_filter, bootstrap_seed, json_out);
    if (assay->parsed()) {
      if (!scripted && ckpt_path.empty()) {
        std::cerr << "usage: efish assay <config> <checkpoint> (or --scripted)\n";
        return 2;
      }
      return cmd_assay(config_path, ckpt_path, scripted, dom_sweep);
    }
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
