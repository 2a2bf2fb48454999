#include "racmc/model.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "racmc/wire.hpp"

namespace racmc {

void AblationFlags::validate() const {
  if (image_only && text_only)
    throw config_error("ablation: image_only and text_only are mutually exclusive");
}

std::vector<std::string> AblationFlags::active_names() const {
  std::vector<std::string> out;
  if (no_l_ic) out.push_back("no_l_ic");
  if (no_l_no) out.push_back("no_l_no");
  if (no_l_ni) out.push_back("no_l_ni");
  if (no_mrc) out.push_back("no_mrc");
  if (no_mgc) out.push_back("no_mgc");
  if (no_dfr) out.push_back("no_dfr");
  if (image_only) out.push_back("image_only");
  if (text_only) out.push_back("text_only");
  return out;
}

AblationFlags AblationFlags::parse(const std::vector<std::string>& names) {
  AblationFlags f;
  for (const std::string& name : names) {
    if (name == "no_l_ic") f.no_l_ic = true;
    else if (name == "no_l_no") f.no_l_no = true;
    else if (name == "no_l_ni") f.no_l_ni = true;
    else if (name == "no_mrc") f.no_mrc = true;
    else if (name == "no_mgc") f.no_mgc = true;
    else if (name == "no_dfr") f.no_dfr = true;
    else if (name == "image_only") f.image_only = true;
    else if (name == "text_only") f.text_only = true;
    else
      throw config_error("ablation: unknown variant '" + name + "'");
  }
  f.validate();
  return f;
}

Index Model::classifier_input_width() const {
  if (cfg_.ablation.unimodal()) return cfg_.n_common;
  if (cfg_.ablation.no_dfr) return 2 * cfg_.n_common;
  return 4 * cfg_.n_common;
}

Model::Model(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.ablation.validate();
  if (cfg_.n_common <= 0 || cfg_.heads <= 0 || cfg_.n_common % cfg_.heads != 0)
    throw config_error("model: common width " + std::to_string(cfg_.n_common) +
                       " must be a positive multiple of heads " + std::to_string(cfg_.heads));
  if (cfg_.mask_tau <= 0) throw config_error("model: mask_tau must be positive");
  Rng rng = derive_rng(init_seed, Stream::init);
  // Construction order is fixed and flag-independent (the classifier width is
  // the only flag-dependent shape, drawn last), so ablations share their init.
  encoder_ = EncoderParams(cfg_.dims, cfg_.n_common, rng);
  mrc_ = MrcParams(cfg_.dims, cfg_.n_common, cfg_.heads, rng);
  dfr_ = DfrParams(cfg_.n_common, rng);
  const Index in_width = classifier_input_width();
  classifier_ = Classifier(in_width, std::max<Index>(in_width / 2, 2), rng);
}

ForwardResult Model::forward(std::span<const NewsRecord> records, const Mode& mode, Rng& rng,
                             MrcDiag* diag) {
  ForwardResult out;
  out.batch = encode_batch(records, encoder_);
  const EncodedBatch& enc = out.batch;
  const AblationFlags& flags = cfg_.ablation;

  if (flags.unimodal()) {
    // single-modality branch of MRC, classified directly
    const bool image = flags.image_only;
    const Tensor& fine = image ? enc.image_fine : enc.text_fine;
    const Tensor& coarse = image ? enc.image_coarse : enc.text_coarse;
    const Tensor& fine_raw = image ? enc.image_fine_raw : enc.text_fine_raw;
    InteractionPairParams& pair = image ? mrc_.image_pair : mrc_.text_pair;
    ProjectionHead& origin = image ? mrc_.image_origin : mrc_.text_origin;
    ProjectionHead& inter_head = image ? mrc_.image_inter : mrc_.text_inter;
    IaffParams& fuse = image ? mrc_.image_fuse : mrc_.text_fuse;

    Tensor fc = add(fine, masked_attention(fine, coarse, coarse, pair.fwd, pair.threshold,
                                           mode, rng));
    Tensor cf = add(coarse, masked_attention(coarse, fine, fine, pair.rev, pair.threshold,
                                             mode, rng));
    Tensor origin_feat = origin.forward(fine_raw, coarse, mode, rng);
    Tensor mid = inter_head.forward(fc, cf, mode, rng);
    Tensor prime = iaff_fuse(origin_feat, mid, fuse, mode);
    if (image) {
      out.fused.i_o = origin_feat;
      out.fused.i_prime = prime;
    } else {
      out.fused.t_o = origin_feat;
      out.fused.t_prime = prime;
    }
    out.probs = classifier_.forward(prime);
    return out;
  }

  if (flags.no_mrc) {
    // plain projection heads over concatenated granularity pairs
    out.fused.t_prime = mrc_.text_origin.forward(enc.text_fine_raw, enc.text_coarse, mode, rng);
    out.fused.i_prime =
        mrc_.image_origin.forward(enc.image_fine_raw, enc.image_coarse, mode, rng);
    out.fused.m_f =
        mrc_.multi_fine_origin.forward(enc.text_fine_raw, enc.image_fine_raw, mode, rng);
    out.fused.m_c =
        mrc_.multi_coarse_origin.forward(enc.text_coarse, enc.image_coarse, mode, rng);
    out.fused.m_prime = mrc_.multi_out.forward(out.fused.m_f, out.fused.m_c, mode, rng);
  } else {
    auto [inter, fused] = mrc_forward(enc, mrc_, mode, rng, diag);
    out.inter = std::move(inter);
    out.fused = std::move(fused);
  }

  if (flags.no_dfr) {
    Tensor unimodal_sum = add(out.fused.t_prime, out.fused.i_prime);
    out.probs = classifier_.forward(concat_cols(unimodal_sum, out.fused.m_prime));
  } else {
    out.reason = reasoning_features(out.fused, dfr_, mode, rng);
    out.probs = classifier_.forward(out.reason->fused_concat);
  }
  return out;
}

BatchLoss Model::losses(const ForwardResult& fwd) {
  const AblationFlags& flags = cfg_.ablation;
  BatchLoss out;

  Tensor l_ic = Tensor::scalar(0.0);
  if (!flags.no_l_ic && fwd.inter.has_value()) {
    InteractionLoss ic = interaction_loss(fwd.batch, *fwd.inter, fwd.fused);
    l_ic = ic.value;
    out.ic_terms = ic.report;
  }

  Tensor l_no = Tensor::scalar(0.0);
  Tensor l_ni = Tensor::scalar(0.0);
  if (!flags.no_mgc && !flags.unimodal()) {
    LabelSplit split = LabelSplit::from_labels(fwd.batch.labels);
    if (!flags.no_l_no) {
      NewsOverallLoss no = news_overall_loss(fwd.fused.m_prime, split, cfg_.mmd_bandwidth);
      l_no = no.value;
      out.mgc_degenerate = no.degenerate;
      out.mmd_bandwidth_used = no.bandwidth;
    }
    if (!flags.no_l_ni)
      l_ni = news_internal_loss(fwd.fused.t_prime, fwd.fused.i_prime, split).value;
  }

  Tensor l_ce = cross_entropy(fwd.probs, fwd.batch.labels);
  TotalLoss t = total_loss(cfg_.lambda, l_ic, l_no, l_ni, l_ce);
  out.value = t.value;
  out.report = t.report;
  return out;
}

NamedParams Model::params() const {
  NamedParams out;
  encoder_.collect("encoder", out);
  mrc_.collect("mrc", out);
  dfr_.collect("dfr", out);
  classifier_.collect("classifier", out);
  return out;
}

NamedBuffers Model::buffers() {
  NamedBuffers out;
  mrc_.collect_buffers("mrc", out);
  dfr_.collect_buffers("dfr", out);
  return out;
}

std::vector<Matrix> Model::state_snapshot() const {
  std::vector<Matrix> out;
  for (const auto& [name, t] : params()) out.push_back(t.value());
  for (const auto& [name, m] : const_cast<Model*>(this)->buffers()) out.push_back(*m);
  return out;
}

void Model::restore_snapshot(const std::vector<Matrix>& snapshot) {
  NamedParams ps = params();
  NamedBuffers bs = buffers();
  if (snapshot.size() != ps.size() + bs.size())
    throw contract_error("restore_snapshot: size mismatch");
  std::size_t k = 0;
  for (auto& [name, t] : ps) {
    Tensor tt = t;
    tt.mutable_value() = snapshot[k++];
  }
  for (auto& [name, m] : bs) *m = snapshot[k++];
}

namespace {
constexpr char kSnapshotMagic[4] = {'R', 'C', 'P', 'S'};
constexpr std::uint32_t kSnapshotVersion = 1;

void put_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  wire::put_u16(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  wire::put_u32(os, static_cast<std::uint32_t>(m.rows()));
  wire::put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) wire::put_f64(os, m(i, j));
}
}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("model save: cannot open " + path);
  nlohmann::json j = {
      {"version", kSnapshotVersion},
      {"n1", cfg_.dims.n1},
      {"n2", cfg_.dims.n2},
      {"n_raw", cfg_.dims.n_raw},
      {"n_common", cfg_.n_common},
      {"heads", cfg_.heads},
      {"lambda", cfg_.lambda},
      {"mask_tau", cfg_.mask_tau},
      {"mmd_bandwidth", cfg_.mmd_bandwidth},
      {"ablation", cfg_.ablation.active_names()},
  };
  const std::string blob = j.dump();
  os.write(kSnapshotMagic, 4);
  wire::put_u32(os, kSnapshotVersion);
  wire::put_u64(os, blob.size());
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  NamedParams ps = params();
  NamedBuffers bs = const_cast<Model*>(this)->buffers();
  wire::put_u64(os, ps.size() + bs.size());
  for (const auto& [name, t] : ps) put_matrix(os, name, t.value());
  for (const auto& [name, m] : bs) put_matrix(os, name, *m);
  if (!os) throw data_error("model save: write failed for " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("model load: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw config_error("model load: bad magic in " + path);
  std::uint32_t version = 0;
  std::uint64_t blob_len = 0;
  if (!wire::get_u32(is, version) || version != kSnapshotVersion)
    throw config_error("model load: unsupported snapshot version in " + path);
  if (!wire::get_u64(is, blob_len))
    throw config_error("model load: truncated header in " + path);
  std::string blob(blob_len, '\0');
  if (!is.read(blob.data(), static_cast<std::streamsize>(blob_len)))
    throw config_error("model load: truncated config in " + path);

  ModelConfig cfg;
  try {
    nlohmann::json j = nlohmann::json::parse(blob);
    cfg.dims.n1 = j.at("n1").get<Index>();
    cfg.dims.n2 = j.at("n2").get<Index>();
    cfg.dims.n_raw = j.at("n_raw").get<Index>();
    cfg.n_common = j.at("n_common").get<Index>();
    cfg.heads = j.at("heads").get<Index>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.mask_tau = j.at("mask_tau").get<double>();
    cfg.mmd_bandwidth = j.at("mmd_bandwidth").get<double>();
    cfg.ablation = AblationFlags::parse(j.at("ablation").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw config_error("model load: corrupt config in " + path + ": " + e.what());
  }

  Model model(cfg, 0);
  std::unordered_map<std::string, Matrix*> table;
  NamedParams ps = model.params();
  for (auto& [name, t] : ps) table[name] = &t.node->value;
  for (auto& [name, m] : model.buffers()) table[name] = m;

  std::uint64_t count = 0;
  if (!wire::get_u64(is, count) || count != table.size())
    throw config_error("model load: snapshot has " + std::to_string(count) +
                       " tensors, model expects " + std::to_string(table.size()));
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint16_t name_len = 0;
    if (!wire::get_u16(is, name_len))
      throw config_error("model load: truncated tensor table in " + path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw config_error("model load: truncated tensor name in " + path);
    std::uint32_t rows = 0, cols = 0;
    if (!wire::get_u32(is, rows) || !wire::get_u32(is, cols))
      throw config_error("model load: truncated tensor dims in " + path);
    auto it = table.find(name);
    if (it == table.end())
      throw config_error("model load: unexpected tensor '" + name + "' in " + path);
    Matrix& dst = *it->second;
    if (dst.rows() != static_cast<Index>(rows) || dst.cols() != static_cast<Index>(cols))
      throw config_error("model load: tensor '" + name + "' is " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", model expects " + std::to_string(dst.rows()) +
                         "x" + std::to_string(dst.cols()));
    for (Index i = 0; i < dst.rows(); ++i)
      for (Index j = 0; j < dst.cols(); ++j)
        if (!wire::get_f64(is, dst(i, j)))
          throw config_error("model load: truncated tensor data in " + path);
  }
  return model;
}

}  // namespace racmc
