#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "racmc/constraints.hpp"
#include "racmc/dfr.hpp"
#include "racmc/mgc.hpp"

namespace racmc {

// Runtime switches mirroring the ablation variants: loss-term removals,
// module replacements, and the unimodal routings.
struct AblationFlags {
  bool no_l_ic = false;
  bool no_l_no = false;
  bool no_l_ni = false;
  bool no_mrc = false;   // plain projection heads instead of attention + iAFF
  bool no_mgc = false;   // drops both distribution losses
  bool no_dfr = false;   // classify on concat(T'+I', M') instead of F1..F4
  bool image_only = false;
  bool text_only = false;

  bool unimodal() const { return image_only || text_only; }
  void validate() const;
  std::vector<std::string> active_names() const;
  static AblationFlags parse(const std::vector<std::string>& names);
};

struct ModelConfig {
  DataDims dims;
  Index n_common = 16;  // projection width N
  Index heads = 8;
  double lambda = 0.1;
  double mask_tau = 0.1;
  double mmd_bandwidth = 0.0;  // <= 0: median heuristic per batch
  AblationFlags ablation;
};

struct ForwardResult {
  EncodedBatch batch;
  std::optional<InteractionSet> inter;  // absent when MRC is replaced
  FusedFeatures fused;                  // only the wired fields are defined
  std::optional<ReasoningFeatures> reason;
  Tensor probs;  // [B x 2]
};

struct BatchLoss {
  Tensor value;
  LossReport report;               // disabled terms are exact zeros
  InteractionLossReport ic_terms;  // itemized l_ic components
  bool mgc_degenerate = false;     // single-class batch hit the l_no fallback
  double mmd_bandwidth_used = 0.0;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }

  ForwardResult forward(std::span<const NewsRecord> records, const Mode& mode, Rng& rng,
                        MrcDiag* diag = nullptr);
  // Loss terms for a training batch, respecting the ablation flags; disabled
  // terms are reported as exact zeros.
  BatchLoss losses(const ForwardResult& fwd);

  Mode train_mode() const { return Mode::train(cfg_.mask_tau); }

  NamedParams params() const;
  NamedBuffers buffers();

  // Deep copy of every parameter and buffer, in registry order.
  std::vector<Matrix> state_snapshot() const;
  void restore_snapshot(const std::vector<Matrix>& snapshot);

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  Index classifier_input_width() const;

  ModelConfig cfg_;
  EncoderParams encoder_;
  MrcParams mrc_;
  DfrParams dfr_;
  Classifier classifier_;
};

}  // namespace racmc
