#include "efish/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "efish/errors.hpp"
#include "efish/geometry.hpp"
#include "efish/rng.hpp"

namespace efish {

SpiDistribution spi_from_intervals(const std::vector<int>& interval_steps, double dt_s,
                                   int n_bins) {
  SpiDistribution out;
  if (interval_steps.empty()) return out;
  out.valid = true;
  out.intervals_s.reserve(interval_steps.size());
  for (int k : interval_steps) out.intervals_s.push_back(k * dt_s);

  std::vector<double> sorted = out.intervals_s;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());

  // Log-spaced histogram.
  const double lo = sorted.front();
  const double hi = sorted.back();
  out.hist_edges.resize(n_bins + 1);
  out.hist_mass.assign(n_bins, 0.0);
  if (hi > lo) {
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (int i = 0; i <= n_bins; ++i)
      out.hist_edges[i] = std::exp(llo + (lhi - llo) * i / n_bins);
    for (double v : out.intervals_s) {
      int bin = static_cast<int>(std::floor((std::log(v) - llo) / (lhi - llo) * n_bins));
      bin = std::clamp(bin, 0, n_bins - 1);
      out.hist_mass[bin] += 1.0 / n;
    }
  } else {  // degenerate: all intervals equal
    for (int i = 0; i <= n_bins; ++i) out.hist_edges[i] = lo;
    out.hist_mass[0] = 1.0;
  }

  // Empirical survival S(tau) = P(interval >= tau) at each distinct value.
  std::vector<std::pair<double, double>> survival;  // (tau, S)
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    survival.emplace_back(sorted[i], static_cast<double>(sorted.size() - i) / n);
    i = j;
  }

  // Least squares on log S over the first decade (S >= 0.1).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& [tau, s] : survival) {
    if (s < 0.1) break;
    const double y = std::log(s);
    sx += tau;
    sy += y;
    sxx += tau * tau;
    sxy += tau * y;
    m += 1;
  }
  double slope = 0.0, intercept = 0.0;
  const double denom = m * sxx - sx * sx;
  if (m >= 2 && std::abs(denom) > 0.0) {
    slope = (m * sxy - sx * sy) / denom;
    intercept = (sy - slope * sx) / m;
  }
  out.fit_rate = -slope;
  out.fit_log_s0 = intercept;

  // Tail excess at the 90th-percentile interval.
  const auto q_idx = static_cast<std::size_t>(
      std::max(0.0, std::min(std::ceil(0.9 * n) - 1.0, n - 1.0)));
  const double tau90 = sorted[q_idx];
  double s90 = 1.0;
  for (const auto& [tau, s] : survival)
    if (tau <= tau90) s90 = s;  // survival at tau90 itself
  out.tail_excess = std::log(s90) - (intercept + slope * tau90);
  return out;
}

SpiDistribution spi_distribution(const EpisodeLog& log, int agent, int n_bins) {
  std::vector<int> eod_steps;
  for (int t = 0; t < log.header.n_steps; ++t)
    if (log.at(t, agent).eod) eod_steps.push_back(t);
  std::vector<int> intervals;
  for (std::size_t k = 1; k < eod_steps.size(); ++k)
    intervals.push_back(eod_steps[k] - eod_steps[k - 1]);
  return spi_from_intervals(intervals, log.header.dt_s, n_bins);
}

bool ConditionFilter::matches(const LogHeader& h) const {
  if (mode && *mode != h.mode) return false;
  if (knollenorgan_enabled && *knollenorgan_enabled != h.knollenorgan_enabled)
    return false;
  if (collective_sensing_enabled &&
      *collective_sensing_enabled != h.collective_sensing_enabled)
    return false;
  return true;
}

EodRateResult eod_probability(const std::vector<EpisodeLog>& logs,
                              const ConditionFilter& filter,
                              std::uint64_t bootstrap_seed, int n_bootstrap) {
  EodRateResult out;
  std::vector<std::pair<std::int64_t, std::int64_t>> per_episode;  // (eods, steps)
  double dt = -1.0;
  for (const auto& log : logs) {
    if (!filter.matches(log.header)) continue;
    if (dt < 0.0) dt = log.header.dt_s;
    else if (dt != log.header.dt_s)
      throw ConfigError("eod_probability: logs mix different dt_s values");
    std::int64_t eods = 0;
    for (const auto& r : log.rows) eods += r.eod ? 1 : 0;
    per_episode.emplace_back(eods, static_cast<std::int64_t>(log.rows.size()));
  }
  if (per_episode.empty()) return out;

  out.empty = false;
  out.n_episodes = static_cast<int>(per_episode.size());
  for (const auto& [e, s] : per_episode) {
    out.n_eods += e;
    out.n_agent_steps += s;
  }
  out.rate = static_cast<double>(out.n_eods) / static_cast<double>(out.n_agent_steps);

  Rng rng;
  rng.reseed(bootstrap_seed, 0);
  std::vector<double> rates(n_bootstrap);
  for (int b = 0; b < n_bootstrap; ++b) {
    std::int64_t eods = 0, steps = 0;
    for (std::size_t k = 0; k < per_episode.size(); ++k) {
      const auto& [e, s] = per_episode[rng.uniform_int(per_episode.size())];
      eods += e;
      steps += s;
    }
    rates[b] = steps > 0 ? static_cast<double>(eods) / steps : 0.0;
  }
  std::sort(rates.begin(), rates.end());
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(
        std::clamp(q * (n_bootstrap - 1), 0.0, n_bootstrap - 1.0));
    return rates[idx];
  };
  out.ci_lo = pct(0.025);
  out.ci_hi = pct(0.975);
  return out;
}

DisplacementStats displacement_stats(const std::vector<EpisodeLog>& logs,
                                     int window_steps) {
  if (window_steps < 1) throw ContractError("displacement_stats: window_steps >= 1");
  DisplacementStats out;
  out.window_steps = window_steps;
  for (const auto& log : logs) {
    for (int a = 0; a < log.header.n_agents; ++a) {
      for (int start = 0; start + window_steps < log.header.n_steps;
           start += window_steps) {
        const auto& r0 = log.at(start, a);
        const auto& r1 = log.at(start + window_steps, a);
        const Vec2 d{r1.x - r0.x, r1.y - r0.y};
        out.displacements_m.push_back(d.norm());
      }
    }
  }
  if (!out.displacements_m.empty())
    out.mean_m = std::accumulate(out.displacements_m.begin(),
                                 out.displacements_m.end(), 0.0) /
                 static_cast<double>(out.displacements_m.size());
  return out;
}

std::optional<double> theil_index(const std::vector<double>& consumptions) {
  double sum = 0.0;
  for (double x : consumptions) {
    if (x < 0.0) throw ContractError("theil_index: negative consumption");
    sum += x;
  }
  if (consumptions.empty() || sum == 0.0) return std::nullopt;
  const double mu = sum / static_cast<double>(consumptions.size());
  double t = 0.0;
  for (double x : consumptions) {
    if (x > 0.0) t += (x / mu) * std::log(x / mu);
  }
  return t / static_cast<double>(consumptions.size());
}

namespace {

// One canonical length-L code for steps [start, start+L) of pair (a, b).
std::string segment_code(const EpisodeLog& log, int a, int b, int start, int L) {
  int eods_a = 0, eods_b = 0;
  for (int t = start; t < start + L; ++t) {
    eods_a += log.at(t, a).eod ? 1 : 0;
    eods_b += log.at(t, b).eod ? 1 : 0;
  }
  // More-active agent first; ties by lower id (a < b by construction).
  const bool swap = eods_b > eods_a;
  const int first = swap ? b : a;
  const int second = swap ? a : b;
  std::string code;
  for (int t = start; t < start + L; ++t) {
    if (t > start) code += ',';
    code += log.at(t, first).eod ? '1' : '0';
    code += log.at(t, second).eod ? '1' : '0';
  }
  return code;
}

}  // namespace

std::map<std::string, std::int64_t> motif_counts(const std::vector<EpisodeLog>& logs,
                                                 double d_motif, int L_motif) {
  if (d_motif <= 0.0 || L_motif < 1)
    throw ContractError("motif_counts: d_motif > 0 and L_motif >= 1 required");
  std::map<std::string, std::int64_t> counts;
  for (const auto& log : logs) {
    const int n = log.header.n_agents;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        int t = 0;
        while (t < log.header.n_steps) {
          const auto& ra = log.at(t, a);
          const auto& rb = log.at(t, b);
          const Vec2 d{ra.x - rb.x, ra.y - rb.y};
          if (d.norm() < d_motif) {
            // Extend the maximal close-contact window.
            int end = t + 1;
            while (end < log.header.n_steps) {
              const auto& ea = log.at(end, a);
              const auto& eb = log.at(end, b);
              const Vec2 e{ea.x - eb.x, ea.y - eb.y};
              if (e.norm() >= d_motif) break;
              ++end;
            }
            const int len = end - t;
            if (len >= L_motif) {
              for (int s = t; s + L_motif <= end; s += L_motif)
                counts[segment_code(log, a, b, s, L_motif)] += 1;
            }
            t = end;
          } else {
            ++t;
          }
        }
      }
    }
  }
  return counts;
}

std::vector<MotifRecord> mine_motifs(const std::vector<EpisodeLog>& logs,
                                     double d_motif, int L_motif, int k) {
  if (k < 1) throw ContractError("mine_motifs: k >= 1 required");
  const auto counts = motif_counts(logs, d_motif, L_motif);
  std::vector<MotifRecord> all;
  all.reserve(counts.size());
  for (const auto& [code, count] : counts) all.push_back({code, count});
  std::sort(all.begin(), all.end(), [](const MotifRecord& x, const MotifRecord& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.code < y.code;
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

std::vector<double> total_food_by_agent(const EpisodeLog& log) {
  std::vector<double> totals(log.header.n_agents, 0.0);
  for (const auto& r : log.rows) totals[r.agent] += r.food_inc;
  return totals;
}

}  // namespace efish
