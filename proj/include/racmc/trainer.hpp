#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "racmc/metrics.hpp"
#include "racmc/model.hpp"
#include "racmc/optim.hpp"

namespace racmc {

struct TrainConfig {
  int epochs = 80;
  Index batch_size = 64;
  double lr = 1e-3;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  Index n_common = 16;
  Index heads = 8;
  double mask_tau = 0.1;
  double mmd_bandwidth = 0.0;  // <= 0: median heuristic per batch
  AblationFlags ablation;

  void validate() const;
  ModelConfig model_config(const DataDims& dims) const;
};

struct EpochResult {
  int epoch = 0;
  double mean_loss = 0;
  MetricsReport test;
};

struct TrainResult {
  std::vector<EpochResult> epochs;
  int best_epoch = -1;
  double best_accuracy = 0;
};

// Eval-mode pass over `data` in fixed order (incomplete final batch kept),
// argmax prediction against the stored labels.
MetricsReport evaluate(Model& model, const std::vector<NewsRecord>& data, Index batch_size);

// Shuffled mini-batch training (incomplete batches dropped), one Adam step per
// batch, test evaluation after every epoch. The model is left holding the
// parameters of the best-test-accuracy epoch. Fully deterministic per seed.
// Optional JSON-lines sink receives one line per step:
// {"epoch":..,"step":..,"l_ic":..,"l_no":..,"l_ni":..,"l_ce":..,"L":..,...}.
TrainResult train(Model& model, const std::vector<NewsRecord>& train_set,
                  const std::vector<NewsRecord>& test_set, const TrainConfig& cfg,
                  std::ostream* jsonl_log = nullptr,
                  double stop_at_accuracy = 2.0 /* never */);

// Per-record fused features of an eval pass as CSV (id, label, prediction,
// then the defined blocks of T', I', M'), for external visualization.
void dump_features(Model& model, const std::vector<NewsRecord>& data, Index batch_size,
                   const std::string& path);

}  // namespace racmc
