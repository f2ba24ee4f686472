#ifndef EFISH_ANALYSIS_HPP_
#define EFISH_ANALYSIS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "efish/episode_log.hpp"

namespace efish {

// Inter-EOD interval statistics for one agent. The exponential reference is
// a least-squares line through the log survival function restricted to the
// first probability decade (S >= 0.1); tail_excess compares empirical vs
// fitted log survival at the 90th-percentile interval. Positive values mean
// a heavier-than-exponential tail.
struct SpiDistribution {
  bool valid = false;  // needs at least 2 EODs
  std::vector<double> intervals_s;
  std::vector<double> hist_edges;  // log-spaced, size = n_bins + 1
  std::vector<double> hist_mass;   // sums to 1
  double fit_log_s0 = 0.0;         // intercept of the log-survival fit
  double fit_rate = 0.0;           // 1/s; slope is -fit_rate
  double tail_excess = 0.0;
};

SpiDistribution spi_distribution(const EpisodeLog& log, int agent, int n_bins = 24);

// Tail-excess on a bare interval list (steps), used by scripted analyses.
SpiDistribution spi_from_intervals(const std::vector<int>& interval_steps, double dt_s,
                                   int n_bins = 24);

// Episode filter over the condition flags carried in each log header.
struct ConditionFilter {
  std::optional<CompetitionMode> mode;
  std::optional<bool> knollenorgan_enabled;
  std::optional<bool> collective_sensing_enabled;

  bool matches(const LogHeader& h) const;
};

struct EodRateResult {
  bool empty = true;
  double rate = 0.0;
  double ci_lo = 0.0;  // bootstrap 95% interval over episodes
  double ci_hi = 0.0;
  std::int64_t n_eods = 0;
  std::int64_t n_agent_steps = 0;
  int n_episodes = 0;
};

EodRateResult eod_probability(const std::vector<EpisodeLog>& logs,
                              const ConditionFilter& filter,
                              std::uint64_t bootstrap_seed = 12345,
                              int n_bootstrap = 1000);

// Euclidean start-to-end distance over non-overlapping windows of
// `window_steps` step intervals, pooled over agents and episodes.
struct DisplacementStats {
  int window_steps = 0;
  std::vector<double> displacements_m;
  double mean_m = 0.0;
};

DisplacementStats displacement_stats(const std::vector<EpisodeLog>& logs,
                                     int window_steps = 9);

// T = (1/N) sum (x_i/mu) ln(x_i/mu); zero entries contribute 0. Returns
// nullopt for all-zero input (undefined); throws on negatives.
std::optional<double> theil_index(const std::vector<double>& consumptions);

// Joint per-step EOD symbols over an agent pair: "00" both silent, first
// digit = first (more active) agent. Codes are comma-joined step symbols.
struct MotifRecord {
  std::string code;
  std::int64_t count = 0;
};

// All length-L codes from maximal close-contact windows (pair distance <
// d_motif for >= L consecutive steps, segmented non-overlapping from the
// window start), canonicalized per segment: more EODs first, ties by lower
// agent id.
std::map<std::string, std::int64_t> motif_counts(const std::vector<EpisodeLog>& logs,
                                                 double d_motif, int L_motif);

// Top-k by count; ties broken by lexicographic code.
std::vector<MotifRecord> mine_motifs(const std::vector<EpisodeLog>& logs,
                                     double d_motif = 0.15, int L_motif = 4,
                                     int k = 6);

// Per-agent total food eaten in a log, the Theil/consumption input.
std::vector<double> total_food_by_agent(const EpisodeLog& log);

}  // namespace efish

#endif  // EFISH_ANALYSIS_HPP_
