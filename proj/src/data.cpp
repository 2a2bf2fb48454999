#include "racmc/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "racmc/errors.hpp"
#include "racmc/wire.hpp"

namespace racmc {

namespace {

constexpr Index kLatentDim = 8;  // shared fine-grained latent width

Eigen::VectorXd unit_direction(Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  const double norm = v.norm();
  return norm > 0 ? Eigen::VectorXd(v / norm) : v;
}

Eigen::MatrixXd latent_mixer(Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, kLatentDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kLatentDim));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < kLatentDim; ++j) m(i, j) = g(rng) * scale;
  return m;
}

std::vector<float> to_floats(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

using wire::get_f32;
using wire::get_u16;
using wire::get_u32;
using wire::get_u64;
using wire::put_f32;
using wire::put_u16;
using wire::put_u32;
using wire::put_u64;

constexpr char kMagic[4] = {'R', 'C', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<NewsRecord> synth_generate(const SynthConfig& cfg) {
  if (cfg.dims.n1 <= 0 || cfg.dims.n2 <= 0 || cfg.dims.n_raw <= 0)
    throw config_error("synth_generate: feature dims must be positive");
  if (cfg.rho < 0.0 || cfg.rho > 1.0)
    throw config_error("synth_generate: rho must be in [0,1]");
  if (cfg.sigma_noise <= 0.0)
    throw config_error("synth_generate: sigma_noise must be positive");
  if (cfg.delta < 0.0) throw config_error("synth_generate: delta must be >= 0");

  Rng rng = derive_rng(cfg.seed, Stream::synth);
  std::normal_distribution<double> g(0.0, 1.0);

  // Block directions and fine-grained latent mixers are fixed per dataset.
  const Eigen::VectorXd u_tf = unit_direction(cfg.dims.n1, rng);
  const Eigen::VectorXd u_tc = unit_direction(cfg.dims.n_raw, rng);
  const Eigen::VectorXd u_if = unit_direction(cfg.dims.n2, rng);
  const Eigen::VectorXd u_ic = unit_direction(cfg.dims.n_raw, rng);
  const Eigen::MatrixXd mix_t = latent_mixer(cfg.dims.n1, rng);
  const Eigen::MatrixXd mix_i = latent_mixer(cfg.dims.n2, rng);

  const double w_shared = std::sqrt(cfg.rho);
  const double w_own = std::sqrt(1.0 - cfg.rho);

  auto gaussian_vec = [&](Index n) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
  };

  std::vector<NewsRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.real_count + cfg.fake_count));
  for (Index k = 0; k < cfg.real_count + cfg.fake_count; ++k) {
    const bool real = k < cfg.real_count;
    const double s = real ? 1.0 : -1.0;

    const Eigen::VectorXd z_fine = gaussian_vec(kLatentDim);
    const Eigen::VectorXd z_coarse = gaussian_vec(cfg.dims.n_raw);

    Eigen::VectorXd tf = s * cfg.delta * u_tf +
                         cfg.sigma_noise * (w_shared * (mix_t * z_fine) +
                                            w_own * gaussian_vec(cfg.dims.n1));
    Eigen::VectorXd tc = s * cfg.delta * u_tc +
                         cfg.sigma_noise * (w_shared * z_coarse +
                                            w_own * gaussian_vec(cfg.dims.n_raw));
    Eigen::VectorXd imf = s * cfg.delta * u_if +
                          cfg.sigma_noise * (w_shared * (mix_i * z_fine) +
                                             w_own * gaussian_vec(cfg.dims.n2));
    Eigen::VectorXd imc = s * cfg.delta * u_ic +
                          cfg.sigma_noise * (w_shared * z_coarse +
                                             w_own * gaussian_vec(cfg.dims.n_raw));

    NewsRecord rec;
    rec.id = (real ? "real-" : "fake-") + std::to_string(real ? k : k - cfg.real_count);
    rec.label = real ? kLabelReal : kLabelFake;
    rec.text_fine = to_floats(tf);
    rec.text_coarse = to_floats(tc);
    rec.image_fine = to_floats(imf);
    rec.image_coarse = to_floats(imc);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_embeddings(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("write_embeddings: cannot open " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(data.dims.n1));
  put_u32(os, static_cast<std::uint32_t>(data.dims.n2));
  put_u32(os, static_cast<std::uint32_t>(data.dims.n_raw));
  put_u64(os, static_cast<std::uint64_t>(data.records.size()));
  for (const NewsRecord& r : data.records) {
    if (static_cast<Index>(r.text_fine.size()) != data.dims.n1 ||
        static_cast<Index>(r.text_coarse.size()) != data.dims.n_raw ||
        static_cast<Index>(r.image_fine.size()) != data.dims.n2 ||
        static_cast<Index>(r.image_coarse.size()) != data.dims.n_raw)
      throw data_error("write_embeddings: record " + r.id + " does not match header dims");
    if (r.id.size() > 0xffff) throw data_error("write_embeddings: id too long: " + r.id);
    put_u16(os, static_cast<std::uint16_t>(r.id.size()));
    os.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
    os.put(static_cast<char>(r.label));
    for (float f : r.text_fine) put_f32(os, f);
    for (float f : r.text_coarse) put_f32(os, f);
    for (float f : r.image_fine) put_f32(os, f);
    for (float f : r.image_coarse) put_f32(os, f);
  }
  if (!os) throw data_error("write_embeddings: write failed for " + path);
}

Dataset load_embeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("load_embeddings: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw data_error("load_embeddings: bad magic in " + path);
  std::uint32_t version = 0, n1 = 0, n2 = 0, n_raw = 0;
  std::uint64_t count = 0;
  if (!get_u32(is, version) || version != kVersion)
    throw data_error("load_embeddings: unsupported version in " + path);
  if (!get_u32(is, n1) || !get_u32(is, n2) || !get_u32(is, n_raw) || !get_u64(is, count))
    throw data_error("load_embeddings: truncated header in " + path);

  Dataset out;
  out.dims = {static_cast<Index>(n1), static_cast<Index>(n2), static_cast<Index>(n_raw)};
  out.records.reserve(count);

  auto read_block = [&](std::vector<float>& dst, std::size_t n, std::uint64_t rec_idx) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!get_f32(is, dst[i]))
        throw data_error("load_embeddings: truncated vector in record " + std::to_string(rec_idx));
  };

  for (std::uint64_t k = 0; k < count; ++k) {
    NewsRecord rec;
    std::uint16_t id_len = 0;
    if (!get_u16(is, id_len))
      throw data_error("load_embeddings: truncated record " + std::to_string(k));
    rec.id.resize(id_len);
    if (id_len > 0 && !is.read(rec.id.data(), id_len))
      throw data_error("load_embeddings: truncated id in record " + std::to_string(k));
    int label = is.get();
    if (label == EOF)
      throw data_error("load_embeddings: truncated label in record " + std::to_string(k));
    if (label != kLabelFake && label != kLabelReal)
      throw data_error("load_embeddings: record " + rec.id + " has label " +
                       std::to_string(label) + ", expected 0 (fake) or 1 (real)");
    rec.label = label;
    read_block(rec.text_fine, n1, k);
    read_block(rec.text_coarse, n_raw, k);
    read_block(rec.image_fine, n2, k);
    read_block(rec.image_coarse, n_raw, k);
    for (const auto* block : {&rec.text_fine, &rec.text_coarse, &rec.image_fine, &rec.image_coarse})
      for (float f : *block)
        if (!std::isfinite(f))
          throw data_error("load_embeddings: non-finite value in record " + rec.id);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace racmc
