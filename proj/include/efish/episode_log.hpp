#ifndef EFISH_EPISODE_LOG_HPP_
#define EFISH_EPISODE_LOG_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "efish/config.hpp"
#include "efish/world.hpp"

namespace efish {

// Binary container: 48-byte header, then fixed-width 72-byte little-endian
// rows ordered by (step, agent). Actions are stored at full precision so a
// log can be replayed bit-exactly.
struct LogHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;  // environment seed of this episode
  double dt_s = 0.0;
  int n_agents = 0;
  int n_steps = 0;
  CompetitionMode mode = CompetitionMode::NoCompetition;
  bool knollenorgan_enabled = true;
  bool collective_sensing_enabled = true;
};

struct LogRow {
  int step = 0;
  int agent = 0;
  bool eod = false;
  bool bite = false;
  bool wall_contact = false;
  double thrust = 0.0;  // commanded action this step
  double turn = 0.0;
  double x = 0.0;  // state after the step
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double reward = 0.0;
  int food_inc = 0;  // items eaten this step
};

struct EpisodeLog {
  LogHeader header;
  std::vector<LogRow> rows;  // n_steps * n_agents, (step, agent) order

  const LogRow& at(int step, int agent) const {
    return rows[static_cast<std::size_t>(step) * header.n_agents + agent];
  }
};

void write_episode_log(const std::string& path, const EpisodeLog& log);

// Distinct errors for bad magic, unsupported version, and truncation; also
// validates strict (step, agent) row ordering.
EpisodeLog read_episode_log(const std::string& path);

// Tab-separated export with a header line; one row per (step, agent).
void export_text(const EpisodeLog& log, std::ostream& os);

}  // namespace efish

#endif  // EFISH_EPISODE_LOG_HPP_
