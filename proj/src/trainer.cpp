#include "racmc/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace racmc {

void TrainConfig::validate() const {
  if (epochs <= 0) throw config_error("train: epochs must be positive");
  if (batch_size < 2) throw config_error("train: batch size must be at least 2");
  if (lr < 0) throw config_error("train: learning rate must be nonnegative");
  if (lambda < 0) throw config_error("train: lambda must be nonnegative");
  ablation.validate();
}

ModelConfig TrainConfig::model_config(const DataDims& dims) const {
  ModelConfig mc;
  mc.dims = dims;
  mc.n_common = n_common;
  mc.heads = heads;
  mc.lambda = lambda;
  mc.mask_tau = mask_tau;
  mc.mmd_bandwidth = mmd_bandwidth;
  mc.ablation = ablation;
  return mc;
}

MetricsReport evaluate(Model& model, const std::vector<NewsRecord>& data, Index batch_size) {
  if (data.empty()) throw data_error("evaluate: empty dataset");
  Rng unused(0);  // eval mode draws nothing
  std::vector<int> truth, pred;
  truth.reserve(data.size());
  pred.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min(static_cast<std::size_t>(batch_size), data.size() - start);
    std::span<const NewsRecord> slice(data.data() + start, len);
    ForwardResult fwd = model.forward(slice, Mode::eval(), unused);
    for (Index i = 0; i < fwd.probs.rows(); ++i) {
      truth.push_back(fwd.batch.labels[static_cast<std::size_t>(i)]);
      pred.push_back(fwd.probs.value()(i, 1) > fwd.probs.value()(i, 0) ? 1 : 0);
    }
  }
  return MetricsReport::from_predictions(truth, pred);
}

namespace {

void write_step_line(std::ostream& os, int epoch, int step, const BatchLoss& loss) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["l_ic"] = loss.report.l_ic;
  j["l_no"] = loss.report.l_no;
  j["l_ni"] = loss.report.l_ni;
  j["l_ce"] = loss.report.l_ce;
  j["L"] = loss.report.total;
  j["l_c_T"] = loss.ic_terms.l_c_text;
  j["l_c_I"] = loss.ic_terms.l_c_image;
  j["l_c_M"] = loss.ic_terms.l_c_multi;
  j["l_e_T"] = loss.ic_terms.l_e_text;
  j["l_e_I"] = loss.ic_terms.l_e_image;
  j["l_e_M"] = loss.ic_terms.l_e_multi;
  os << j.dump() << "\n";
}

}  // namespace

TrainResult train(Model& model, const std::vector<NewsRecord>& train_set,
                  const std::vector<NewsRecord>& test_set, const TrainConfig& cfg,
                  std::ostream* jsonl_log, double stop_at_accuracy) {
  cfg.validate();
  if (train_set.empty() || test_set.empty())
    throw data_error("train: empty train or test split");
  bool has_real = false, has_fake = false;
  for (const NewsRecord& r : train_set) (r.label == kLabelReal ? has_real : has_fake) = true;
  if (!has_real || !has_fake)
    throw config_error("train: training split must contain both classes");

  Adam optimizer(
      [&] {
        std::vector<Tensor> ps;
        for (auto& [name, t] : model.params()) ps.push_back(t);
        return ps;
      }(),
      AdamConfig{.lr = cfg.lr});
  optimizer.zero_grad();

  Rng shuffle_rng = derive_rng(cfg.seed, Stream::shuffle);
  Rng dropout_rng = derive_rng(cfg.seed, Stream::dropout);
  const Mode train_mode = model.train_mode();

  TrainResult result;
  std::vector<Matrix> best_state = model.state_snapshot();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    int steps = 0;
    // incomplete trailing mini-batch dropped: batch-norm and the label-split
    // losses degrade below 2 rows
    for (std::size_t start = 0; start + static_cast<std::size_t>(cfg.batch_size) <= order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<NewsRecord> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (Index k = 0; k < cfg.batch_size; ++k)
        batch.push_back(train_set[order[start + static_cast<std::size_t>(k)]]);

      Tape tape;
      BatchLoss loss;
      {
        Tape::Scope scope(tape);
        ForwardResult fwd = model.forward(batch, train_mode, dropout_rng);
        loss = model.losses(fwd);
        tape.backward(loss.value);
      }
      optimizer.step();
      optimizer.zero_grad();

      if (jsonl_log) write_step_line(*jsonl_log, epoch, steps, loss);
      loss_sum += loss.report.total;
      ++steps;
    }
    if (steps == 0)
      throw config_error("train: batch size " + std::to_string(cfg.batch_size) +
                         " exceeds the training split of " + std::to_string(train_set.size()));

    EpochResult er;
    er.epoch = epoch;
    er.mean_loss = loss_sum / steps;
    er.test = evaluate(model, test_set, cfg.batch_size);
    result.epochs.push_back(er);

    if (er.test.accuracy > result.best_accuracy || result.best_epoch < 0) {
      result.best_accuracy = er.test.accuracy;
      result.best_epoch = epoch;
      best_state = model.state_snapshot();
    }
    if (result.best_accuracy >= stop_at_accuracy) break;
  }

  model.restore_snapshot(best_state);
  return result;
}

void dump_features(Model& model, const std::vector<NewsRecord>& data, Index batch_size,
                   const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("dump_features: cannot open " + path);
  const Index n = model.config().n_common;
  os << "id,label,prediction";
  for (const char* block : {"t_prime", "i_prime", "m_prime"})
    for (Index j = 0; j < n; ++j) os << "," << block << "_" << j;
  os << "\n";

  Rng unused(0);
  char buf[32];
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min(static_cast<std::size_t>(batch_size), data.size() - start);
    std::span<const NewsRecord> slice(data.data() + start, len);
    ForwardResult fwd = model.forward(slice, Mode::eval(), unused);
    for (Index i = 0; i < static_cast<Index>(len); ++i) {
      const NewsRecord& rec = data[start + static_cast<std::size_t>(i)];
      const int pred = fwd.probs.value()(i, 1) > fwd.probs.value()(i, 0) ? 1 : 0;
      os << rec.id << "," << rec.label << "," << pred;
      for (const Tensor* t : {&fwd.fused.t_prime, &fwd.fused.i_prime, &fwd.fused.m_prime}) {
        for (Index j = 0; j < n; ++j) {
          const double v = t->defined() ? t->value()(i, j) : 0.0;
          std::snprintf(buf, sizeof buf, "%.17g", v);
          os << "," << buf;
        }
      }
      os << "\n";
    }
  }
}

}  // namespace racmc
