#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "racmc/trainer.hpp"
#include "test_util.hpp"

using namespace racmc;

namespace {

SynthConfig small_synth(std::uint64_t seed, Index per_class = 24, double delta = 10.0) {
  SynthConfig cfg;
  cfg.real_count = cfg.fake_count = per_class;
  cfg.dims = {6, 7, 8};
  cfg.n_common = 8;
  cfg.delta = delta;
  cfg.rho = 0.9;
  cfg.sigma_noise = 1.0;
  cfg.seed = seed;
  return cfg;
}

TrainConfig small_train(std::uint64_t seed, int epochs = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.n_common = 8;
  cfg.heads = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("metrics: formula oracles and degenerate conventions") {
  // class fake: TP=1, FP=0, FN=1, TN=2
  MetricsReport r = MetricsReport::from_predictions({0, 0, 1, 1}, {0, 1, 1, 1});
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.fake.precision == doctest::Approx(1.0));
  CHECK(r.fake.recall == doctest::Approx(0.5));
  CHECK(r.fake.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.confusion[0][0] + r.confusion[0][1] + r.confusion[1][0] + r.confusion[1][1] ==
        r.total);

  MetricsReport perfect = MetricsReport::from_predictions({0, 1, 0, 1}, {0, 1, 0, 1});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.fake.f1 == 1.0);
  CHECK(perfect.real.f1 == 1.0);

  // all-real predictor on balanced data
  MetricsReport onesided = MetricsReport::from_predictions({0, 1, 0, 1}, {1, 1, 1, 1});
  CHECK(onesided.accuracy == doctest::Approx(0.5));
  CHECK(onesided.fake.f1 == 0.0);
  CHECK(onesided.fake.recall == 0.0);
}

TEST_CASE("train: deterministic per seed, bitwise") {
  auto records = synth_generate(small_synth(3));
  std::vector<NewsRecord> train_set(records.begin(), records.begin() + 32);
  std::vector<NewsRecord> test_set(records.begin() + 32, records.end());

  TrainConfig cfg = small_train(11);
  auto run = [&](std::string& log_out) {
    Model model(cfg.model_config({6, 7, 8}), cfg.seed);
    std::ostringstream log;
    TrainResult res = train(model, train_set, test_set, cfg, &log);
    log_out = log.str();
    return res;
  };
  std::string log_a, log_b;
  TrainResult a = run(log_a);
  TrainResult b = run(log_b);
  CHECK(log_a == log_b);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].mean_loss == b.epochs[e].mean_loss);
    CHECK(a.epochs[e].test.accuracy == b.epochs[e].test.accuracy);
  }
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("train: lr=0 leaves parameters and accuracy unchanged") {
  auto records = synth_generate(small_synth(5));
  std::vector<NewsRecord> train_set(records.begin(), records.begin() + 32);
  std::vector<NewsRecord> test_set(records.begin() + 32, records.end());

  TrainConfig cfg = small_train(7);
  cfg.lr = 0.0;
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);
  std::vector<Matrix> before;
  for (auto& [name, t] : model.params()) before.push_back(t.value());

  TrainResult res = train(model, train_set, test_set, cfg);
  std::size_t k = 0;
  for (auto& [name, t] : model.params()) CHECK(t.value() == before[k++]);
  for (const EpochResult& er : res.epochs)
    CHECK(er.test.accuracy == res.epochs.front().test.accuracy);
}

TEST_CASE("train: single-class training split is a config error") {
  auto records = synth_generate(small_synth(9));
  std::vector<NewsRecord> reals;
  for (const auto& r : records)
    if (r.label == kLabelReal) reals.push_back(r);
  TrainConfig cfg = small_train(1);
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);
  CHECK_THROWS_AS(train(model, reals, records, cfg), config_error);
}

TEST_CASE("train: best-epoch parameters are restored") {
  auto records = synth_generate(small_synth(13, 20, 2.0));
  std::vector<NewsRecord> train_set(records.begin(), records.begin() + 24);
  std::vector<NewsRecord> test_set(records.begin() + 24, records.end());
  TrainConfig cfg = small_train(17, 4);
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);
  TrainResult res = train(model, train_set, test_set, cfg);
  MetricsReport again = evaluate(model, test_set, cfg.batch_size);
  CHECK(again.accuracy == res.best_accuracy);
  CHECK(res.best_accuracy ==
        res.epochs[static_cast<std::size_t>(res.best_epoch)].test.accuracy);
}

TEST_CASE("ablation wiring: loss identities, classifier widths, finite losses") {
  auto records = synth_generate(small_synth(21));
  // straddle the real/fake boundary so the batch carries both classes
  std::vector<NewsRecord> train_set(records.begin() + 20, records.begin() + 28);

  auto one_batch_loss = [&](AblationFlags flags) {
    TrainConfig cfg = small_train(23, 1);
    cfg.ablation = flags;
    Model model(cfg.model_config({6, 7, 8}), cfg.seed);
    Rng rng = derive_rng(cfg.seed, Stream::dropout);
    std::span<const NewsRecord> slice(train_set.data(), 8);
    Tape tape;
    Tape::Scope scope(tape);
    ForwardResult fwd = model.forward(slice, model.train_mode(), rng);
    return model.losses(fwd);
  };

  BatchLoss full = one_batch_loss({});
  CHECK(std::isfinite(full.report.total));
  CHECK(full.report.l_ic > 0.0);
  CHECK(full.report.total == doctest::Approx(0.1 * full.report.l_ic + full.report.l_no +
                                             full.report.l_ni + full.report.l_ce));

  AblationFlags no_ic;
  no_ic.no_l_ic = true;
  BatchLoss a = one_batch_loss(no_ic);
  CHECK(a.report.l_ic == 0.0);
  CHECK(a.report.total == ((0.0 + a.report.l_no) + a.report.l_ni) + a.report.l_ce);

  AblationFlags no_mgc;
  no_mgc.no_mgc = true;
  BatchLoss b = one_batch_loss(no_mgc);
  CHECK(b.report.l_no == 0.0);
  CHECK(b.report.l_ni == 0.0);
  CHECK(b.report.total == ((0.1 * b.report.l_ic + 0.0) + 0.0) + b.report.l_ce);

  AblationFlags no_mrc;
  no_mrc.no_mrc = true;
  BatchLoss c = one_batch_loss(no_mrc);
  CHECK(c.report.l_ic == 0.0);  // no interaction features exist
  CHECK(std::isfinite(c.report.total));

  // classifier width adapts: full 4N, no_dfr 2N, unimodal N
  TrainConfig cfg = small_train(29, 1);
  Model m_full(cfg.model_config({6, 7, 8}), 1);
  CHECK(m_full.params().back().second.cols() == 2);  // classifier bias last
  auto width_of = [&](AblationFlags flags) {
    TrainConfig c2 = small_train(29, 1);
    c2.ablation = flags;
    Model m(c2.model_config({6, 7, 8}), 1);
    for (auto& [name, t] : m.params())
      if (name == "classifier.W1") return t.rows();
    throw std::runtime_error("classifier.W1 missing");
  };
  CHECK(width_of({}) == 32);
  AblationFlags nd;
  nd.no_dfr = true;
  CHECK(width_of(nd) == 16);
  AblationFlags im;
  im.image_only = true;
  CHECK(width_of(im) == 8);

  AblationFlags conflict;
  conflict.image_only = conflict.text_only = true;
  CHECK_THROWS_AS(conflict.validate(), config_error);
}

TEST_CASE("ablation runs complete with finite losses; full stays competitive") {
  auto records = synth_generate(small_synth(31, 30));
  std::vector<NewsRecord> train_set(records.begin(), records.begin() + 40);
  std::vector<NewsRecord> test_set(records.begin() + 40, records.end());

  auto accuracy_of = [&](AblationFlags flags) {
    TrainConfig cfg = small_train(37, 4);
    cfg.ablation = flags;
    Model model(cfg.model_config({6, 7, 8}), cfg.seed);
    TrainResult res = train(model, train_set, test_set, cfg);
    for (const EpochResult& er : res.epochs) CHECK(std::isfinite(er.mean_loss));
    return res.best_accuracy;
  };
  const double full = accuracy_of({});
  AblationFlags no_mgc;
  no_mgc.no_mgc = true;
  const double ablated = accuracy_of(no_mgc);
  CHECK(full >= ablated - 0.02);
}

TEST_CASE("train/eval forward agree when mode switches are neutralized") {
  auto records = synth_generate(small_synth(41));
  std::vector<NewsRecord> slice(records.begin(), records.begin() + 8);
  TrainConfig cfg = small_train(43);
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);

  Mode train_like;
  train_like.bn = BnMode::bypass;
  train_like.dropout = false;
  train_like.soft_mask = true;
  train_like.mask_tau = 1e-4;
  Mode eval_like;
  eval_like.bn = BnMode::bypass;
  eval_like.dropout = false;
  eval_like.soft_mask = false;

  Rng r1(0), r2(0);
  Matrix p_train = model.forward(slice, train_like, r1).probs.value();
  Matrix p_eval = model.forward(slice, eval_like, r2).probs.value();
  for (Index i = 0; i < p_train.rows(); ++i)
    for (Index j = 0; j < p_train.cols(); ++j)
      CHECK(std::fabs(p_train(i, j) - p_eval(i, j)) < 1e-3);
}

TEST_CASE("model snapshot round trip reproduces outputs bitwise") {
  auto records = synth_generate(small_synth(47));
  std::vector<NewsRecord> slice(records.begin(), records.begin() + 6);
  TrainConfig cfg = small_train(53);
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);
  // move running stats off their init values
  Rng rng(1);
  Tape tape;
  {
    Tape::Scope scope(tape);
    model.forward(slice, model.train_mode(), rng);
  }

  const std::string path = "snapshot.rcps";
  model.save(path);
  Model loaded = Model::load(path);
  Rng r1(0), r2(0);
  Matrix a = model.forward(slice, Mode::eval(), r1).probs.value();
  Matrix b = loaded.forward(slice, Mode::eval(), r2).probs.value();
  CHECK(a == b);
  std::remove(path.c_str());

  // corrupt snapshots are config errors
  const std::string bad = "bad.rcps";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "RCPSgarbage";
  }
  CHECK_THROWS_AS(Model::load(bad), config_error);
  std::remove(bad.c_str());
}

TEST_CASE("training log lines carry the pinned schema") {
  auto records = synth_generate(small_synth(59));
  std::vector<NewsRecord> train_set(records.begin() + 16, records.begin() + 32);
  std::vector<NewsRecord> test_set(records.begin(), records.begin() + 16);
  TrainConfig cfg = small_train(61, 1);
  Model model(cfg.model_config({6, 7, 8}), cfg.seed);
  std::ostringstream log;
  train(model, train_set, test_set, cfg, &log);
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    for (const char* key : {"\"epoch\"", "\"step\"", "\"l_ic\"", "\"l_no\"", "\"l_ni\"",
                            "\"l_ce\"", "\"L\""})
      CHECK(line.find(key) != std::string::npos);
    ++count;
  }
  CHECK(count == 2);  // 16 records / batch 8
}
