#include "efish/checkpoint.hpp"

#include <fstream>

#include "efish/errors.hpp"
#include "efish/io_util.hpp"

namespace efish {

namespace {
constexpr char kMagic[4] = {'E', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  io::put_u32(os, kVersion);
  io::put_u32(os, static_cast<std::uint32_t>(meta.obs_dim));
  io::put_u32(os, static_cast<std::uint32_t>(meta.hidden_dim));
  io::put_u32(os, static_cast<std::uint32_t>(meta.n_mormyromast));
  io::put_u32(os, static_cast<std::uint32_t>(meta.n_ampullary));
  io::put_u32(os, static_cast<std::uint32_t>(meta.n_knollenorgan));
  io::put_u32(os, static_cast<std::uint32_t>(meta.n_heads));
  io::put_u32(os, static_cast<std::uint32_t>(meta.n_gaussian_heads));
  io::put_u64(os, meta.config_hash);
  io::put_i64(os, meta.env_steps);
  io::put_i64(os, meta.update_index);

  const auto tensors = params.tensors();
  io::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    io::put_str(os, t.name);
    const Eigen::Index rows = t.mat ? t.mat->rows() : t.vec->size();
    const Eigen::Index cols = t.mat ? t.mat->cols() : 1;
    io::put_u32(os, static_cast<std::uint32_t>(rows));
    io::put_u32(os, static_cast<std::uint32_t>(cols));
  }
  for (const auto& t : tensors) {
    if (t.mat) {
      for (Eigen::Index c = 0; c < t.mat->cols(); ++c)
        for (Eigen::Index r = 0; r < t.mat->rows(); ++r)
          io::put_f32(os, static_cast<float>((*t.mat)(r, c)));
    } else {
      for (Eigen::Index i = 0; i < t.vec->size(); ++i)
        io::put_f32(os, static_cast<float>((*t.vec)[i]));
    }
  }
  if (!os) throw IoError("write failure on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  const std::uint32_t version = io::get_u32(is);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  LoadedCheckpoint out;
  CheckpointMeta& meta = out.meta;
  meta.obs_dim = static_cast<int>(io::get_u32(is));
  meta.hidden_dim = static_cast<int>(io::get_u32(is));
  meta.n_mormyromast = static_cast<int>(io::get_u32(is));
  meta.n_ampullary = static_cast<int>(io::get_u32(is));
  meta.n_knollenorgan = static_cast<int>(io::get_u32(is));
  meta.n_heads = static_cast<int>(io::get_u32(is));
  meta.n_gaussian_heads = static_cast<int>(io::get_u32(is));
  meta.config_hash = io::get_u64(is);
  meta.env_steps = io::get_i64(is);
  meta.update_index = io::get_i64(is);
  if (meta.n_heads != kNumHeads || meta.n_gaussian_heads != kNumGaussianHeads)
    throw IoError("checkpoint head configuration not supported");

  out.params = PolicyParams::zeros(meta.obs_dim, meta.hidden_dim);
  auto tensors = out.params.tensors();
  const std::uint32_t n_tensors = io::get_u32(is);
  if (n_tensors != tensors.size())
    throw IoError("checkpoint manifest has " + std::to_string(n_tensors) +
                  " tensors, expected " + std::to_string(tensors.size()));
  for (auto& t : tensors) {
    const std::string name = io::get_str(is);
    const auto rows = static_cast<Eigen::Index>(io::get_u32(is));
    const auto cols = static_cast<Eigen::Index>(io::get_u32(is));
    const Eigen::Index want_rows = t.mat ? t.mat->rows() : t.vec->size();
    const Eigen::Index want_cols = t.mat ? t.mat->cols() : 1;
    if (name != t.name || rows != want_rows || cols != want_cols)
      throw IoError("checkpoint manifest mismatch at tensor '" + name + "'");
  }
  for (auto& t : tensors) {
    if (t.mat) {
      for (Eigen::Index c = 0; c < t.mat->cols(); ++c)
        for (Eigen::Index r = 0; r < t.mat->rows(); ++r)
          (*t.mat)(r, c) = static_cast<double>(io::get_f32(is));
    } else {
      for (Eigen::Index i = 0; i < t.vec->size(); ++i)
        (*t.vec)[i] = static_cast<double>(io::get_f32(is));
    }
  }
  return out;
}

}  // namespace efish
