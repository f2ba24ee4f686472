#include "efish/episode_log.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "efish/errors.hpp"
#include "efish/io_util.hpp"

namespace efish {

namespace {
constexpr char kMagic[4] = {'E', 'F', 'L', 'G'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kRowSize = 72;
constexpr std::uint32_t kHeaderSize = 48;
}  // namespace

void write_episode_log(const std::string& path, const EpisodeLog& log) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open log for writing: " + path);
  os.write(kMagic, 4);
  io::put_u32(os, kVersion);
  io::put_u64(os, log.header.config_hash);
  io::put_u64(os, log.header.seed);
  io::put_f64(os, log.header.dt_s);
  io::put_u32(os, static_cast<std::uint32_t>(log.header.n_agents));
  io::put_u32(os, static_cast<std::uint32_t>(log.header.n_steps));
  io::put_u32(os, kRowSize);
  io::put_u8(os, log.header.mode == CompetitionMode::Competition ? 1 : 0);
  io::put_u8(os, log.header.knollenorgan_enabled ? 1 : 0);
  io::put_u8(os, log.header.collective_sensing_enabled ? 1 : 0);
  io::put_u8(os, 0);

  for (const auto& r : log.rows) {
    io::put_u32(os, static_cast<std::uint32_t>(r.step));
    io::put_u8(os, static_cast<std::uint8_t>(r.agent & 0xff));
    io::put_u8(os, static_cast<std::uint8_t>((r.agent >> 8) & 0xff));
    std::uint8_t flags = 0;
    if (r.eod) flags |= 1;
    if (r.bite) flags |= 2;
    if (r.wall_contact) flags |= 4;
    io::put_u8(os, flags);
    io::put_u8(os, 0);
    io::put_f64(os, r.thrust);
    io::put_f64(os, r.turn);
    io::put_f64(os, r.x);
    io::put_f64(os, r.y);
    io::put_f64(os, r.heading);
    io::put_f64(os, r.speed);
    io::put_f64(os, r.reward);
    io::put_u32(os, static_cast<std::uint32_t>(r.food_inc));
    io::put_u32(os, 0);
  }
  if (!os) throw IoError("write failure on log: " + path);
}

EpisodeLog read_episode_log(const std::string& path) {
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat log file: " + path);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open log: " + path);

  char magic[4];
  if (file_size < kHeaderSize || !is.read(magic, 4) ||
      std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not an episode log (bad magic): " + path);
  const std::uint32_t version = io::get_u32(is);
  if (version != kVersion)
    throw IoError("unsupported episode log version " + std::to_string(version) +
                  " in " + path);

  EpisodeLog log;
  log.header.config_hash = io::get_u64(is);
  log.header.seed = io::get_u64(is);
  log.header.dt_s = io::get_f64(is);
  log.header.n_agents = static_cast<int>(io::get_u32(is));
  log.header.n_steps = static_cast<int>(io::get_u32(is));
  const std::uint32_t row_size = io::get_u32(is);
  if (row_size != kRowSize)
    throw IoError("unexpected row size " + std::to_string(row_size) + " in " + path);
  log.header.mode =
      io::get_u8(is) ? CompetitionMode::Competition : CompetitionMode::NoCompetition;
  log.header.knollenorgan_enabled = io::get_u8(is) != 0;
  log.header.collective_sensing_enabled = io::get_u8(is) != 0;
  io::get_u8(is);  // reserved

  const std::uint64_t n_rows =
      static_cast<std::uint64_t>(log.header.n_steps) * log.header.n_agents;
  const std::uint64_t expected = kHeaderSize + n_rows * kRowSize;
  if (file_size != expected)
    throw IoError("truncated or padded episode log: " + path + " (" +
                  std::to_string(file_size) + " bytes, expected " +
                  std::to_string(expected) + ")");

  log.rows.resize(n_rows);
  for (std::uint64_t i = 0; i < n_rows; ++i) {
    LogRow& r = log.rows[i];
    r.step = static_cast<int>(io::get_u32(is));
    r.agent = io::get_u8(is) | (io::get_u8(is) << 8);
    const std::uint8_t flags = io::get_u8(is);
    r.eod = flags & 1;
    r.bite = flags & 2;
    r.wall_contact = flags & 4;
    io::get_u8(is);  // reserved
    r.thrust = io::get_f64(is);
    r.turn = io::get_f64(is);
    r.x = io::get_f64(is);
    r.y = io::get_f64(is);
    r.heading = io::get_f64(is);
    r.speed = io::get_f64(is);
    r.reward = io::get_f64(is);
    r.food_inc = static_cast<int>(io::get_u32(is));
    io::get_u32(is);  // reserved
    const int want_step = static_cast<int>(i) / log.header.n_agents;
    const int want_agent = static_cast<int>(i) % log.header.n_agents;
    if (r.step != want_step || r.agent != want_agent)
      throw IoError("episode log rows out of order at index " + std::to_string(i) +
                    " in " + path);
  }
  return log;
}

void export_text(const EpisodeLog& log, std::ostream& os) {
  os << "step\tagent\teod\tbite\twall_contact\tthrust\tturn\tx\ty\theading\t"
        "speed\treward\tfood_inc\n";
  os.precision(17);
  for (const auto& r : log.rows) {
    os << r.step << '\t' << r.agent << '\t' << (r.eod ? 1 : 0) << '\t'
       << (r.bite ? 1 : 0) << '\t' << (r.wall_contact ? 1 : 0) << '\t' << r.thrust
       << '\t' << r.turn << '\t' << r.x << '\t' << r.y << '\t' << r.heading << '\t'
       << r.speed << '\t' << r.reward << '\t' << r.food_inc << '\n';
  }
}

}  // namespace efish
