#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "racmc/gradcheck.hpp"
#include "racmc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace racmc;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

// exit codes: 0 success, 1 check failure, 2 config error, 3 data error
constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;

ordered_json metrics_json(const MetricsReport& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["total"] = m.total;
  j["fake"] = {{"precision", m.fake.precision}, {"recall", m.fake.recall}, {"f1", m.fake.f1}};
  j["real"] = {{"precision", m.real.precision}, {"recall", m.real.recall}, {"f1", m.real.f1}};
  j["confusion"] = {{m.confusion[0][0], m.confusion[0][1]},
                    {m.confusion[1][0], m.confusion[1][1]}};
  return j;
}

void print_metrics(const MetricsReport& m) {
  std::printf("accuracy %.4f over %ld records\n", m.accuracy, m.total);
  std::printf("  %-6s %-9s %-9s %-9s\n", "class", "precision", "recall", "f1");
  std::printf("  %-6s %-9.4f %-9.4f %-9.4f\n", "fake", m.fake.precision, m.fake.recall,
              m.fake.f1);
  std::printf("  %-6s %-9.4f %-9.4f %-9.4f\n", "real", m.real.precision, m.real.recall,
              m.real.f1);
}

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

int cmd_synth(const SynthArgs& args) {
  if (args.cfg.real_count + args.cfg.fake_count <= 0)
    throw config_error("synth: dataset would be empty (real + fake count is 0)");
  Dataset ds{args.cfg.dims, synth_generate(args.cfg)};
  write_embeddings(args.out, ds);
  long real = 0, fake = 0;
  for (const auto& r : ds.records) (r.label == kLabelReal ? real : fake) += 1;
  std::printf("wrote %s\n", args.out.c_str());
  std::printf("  %-8s %-6s %-6s %-6s\n", "split", "Real", "Fake", "Total");
  std::printf("  %-8s %-6ld %-6ld %-6ld\n", "all", real, fake, real + fake);
  std::printf("dims: n1=%lld n2=%lld n_raw=%lld (project to N=%lld)\n",
              static_cast<long long>(args.cfg.dims.n1), static_cast<long long>(args.cfg.dims.n2),
              static_cast<long long>(args.cfg.dims.n_raw),
              static_cast<long long>(args.cfg.n_common));
  return kOk;
}

struct TrainArgs {
  std::string train_path, test_path, out_dir;
  TrainConfig cfg;
  std::vector<std::string> ablations;
  bool image_only = false;
  bool text_only = false;
};

ordered_json config_json(const TrainConfig& cfg, const DataDims& dims) {
  ordered_json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  j["n_common"] = cfg.n_common;
  j["heads"] = cfg.heads;
  j["mask_tau"] = cfg.mask_tau;
  j["mmd_bandwidth"] = cfg.mmd_bandwidth;
  j["ablation"] = cfg.ablation.active_names();
  j["dims"] = {{"n1", dims.n1}, {"n2", dims.n2}, {"n_raw", dims.n_raw}};
  return j;
}

int cmd_train(TrainArgs& args) {
  if (args.image_only) args.ablations.push_back("image_only");
  if (args.text_only) args.ablations.push_back("text_only");
  args.cfg.ablation = AblationFlags::parse(args.ablations);
  args.cfg.validate();

  Dataset train_data = load_embeddings(args.train_path);
  Dataset test_data = load_embeddings(args.test_path);
  if (train_data.dims.n1 != test_data.dims.n1 || train_data.dims.n2 != test_data.dims.n2 ||
      train_data.dims.n_raw != test_data.dims.n_raw)
    throw data_error("train: train/test embedding dims disagree");

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  const std::string log_path = (dir / "train_log.jsonl").string();
  const std::string metrics_path = (dir / "metrics.json").string();
  const std::string model_path = (dir / "model.rcps").string();
  const std::string features_path = (dir / "features.csv").string();

  // manifest goes first: it is enough to reproduce the run
  {
    ordered_json manifest;
    manifest["artifact_version"] = kArtifactVersion;
    manifest["command"] = "train";
    manifest["config"] = config_json(args.cfg, train_data.dims);
    manifest["inputs"] = {{"train", args.train_path}, {"test", args.test_path}};
    manifest["outputs"] = {{"log", log_path},
                           {"metrics", metrics_path},
                           {"model", model_path},
                           {"features", features_path}};
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw data_error("train: cannot write manifest in " + args.out_dir);
    mf << manifest.dump(2) << "\n";
  }

  Model model(args.cfg.model_config(train_data.dims), args.cfg.seed);
  std::ofstream log(log_path);
  if (!log) throw data_error("train: cannot open " + log_path);
  TrainResult res = train(model, train_data.records, test_data.records, args.cfg, &log);
  log.close();

  model.save(model_path);
  dump_features(model, test_data.records, args.cfg.batch_size, features_path);

  const MetricsReport& best = res.epochs[static_cast<std::size_t>(res.best_epoch)].test;
  ordered_json out = metrics_json(best);
  out["best_epoch"] = res.best_epoch;
  out["epochs_run"] = res.epochs.size();
  ordered_json curve = ordered_json::array();
  for (const EpochResult& er : res.epochs)
    curve.push_back({{"epoch", er.epoch},
                     {"mean_loss", er.mean_loss},
                     {"accuracy", er.test.accuracy}});
  out["epochs"] = curve;
  std::ofstream mf(metrics_path);
  mf << out.dump(2) << "\n";

  std::printf("best epoch %d\n", res.best_epoch);
  print_metrics(best);
  std::printf("run directory: %s\n", args.out_dir.c_str());
  return kOk;
}

struct EvalArgs {
  std::string params_path, data_path, out_path;
  Index batch_size = 64;
  std::string features_path;    // optional
  std::string diagnostics_dir;  // optional
};

void write_csv_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw data_error("eval: cannot open " + path);
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
}

int cmd_eval(const EvalArgs& args) {
  Model model = Model::load(args.params_path);
  Dataset data = load_embeddings(args.data_path);
  const DataDims& md = model.config().dims;
  if (md.n1 != data.dims.n1 || md.n2 != data.dims.n2 || md.n_raw != data.dims.n_raw)
    throw config_error("eval: snapshot dims (n1=" + std::to_string(md.n1) +
                       ",n2=" + std::to_string(md.n2) + ",n_raw=" + std::to_string(md.n_raw) +
                       ") do not match the data file");
  if (data.records.empty()) throw data_error("eval: empty dataset");

  MetricsReport m = evaluate(model, data.records, args.batch_size);
  print_metrics(m);
  if (!args.out_path.empty()) {
    std::ofstream os(args.out_path);
    if (!os) throw data_error("eval: cannot open " + args.out_path);
    os << metrics_json(m).dump(2) << "\n";
  }
  if (!args.features_path.empty())
    dump_features(model, data.records, args.batch_size, args.features_path);
  if (!args.diagnostics_dir.empty()) {
    fs::create_directories(args.diagnostics_dir);
    const std::size_t len =
        std::min(static_cast<std::size_t>(args.batch_size), data.records.size());
    std::span<const NewsRecord> slice(data.records.data(), len);
    Rng unused(0);
    MrcDiag diag;
    model.forward(slice, Mode::eval(), unused, &diag);
    for (const auto& [name, mat] : diag.omega)
      write_csv_matrix((fs::path(args.diagnostics_dir) / ("omega_" + name + ".csv")).string(),
                       mat);
    for (const auto& [name, mat] : diag.k_tilde)
      write_csv_matrix((fs::path(args.diagnostics_dir) / ("ktilde_" + name + ".csv")).string(),
                       mat);
  }
  return kOk;
}

struct GradcheckArgs {
  double tolerance = 1e-4;
  double h = 1e-5;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();

  SynthConfig synth;
  synth.real_count = synth.fake_count = 2;
  synth.dims = {6, 7, 8};
  synth.n_common = 8;
  synth.delta = 1.0;
  synth.rho = 0.7;
  synth.sigma_noise = 1.0;
  synth.seed = args.seed;
  std::vector<NewsRecord> records = synth_generate(synth);
  // interleave so the 4-sample batch carries both classes
  std::swap(records[1], records[2]);

  ModelConfig mc;
  mc.dims = synth.dims;
  mc.n_common = 8;
  mc.heads = 2;
  Model model(mc, args.seed);

  // bandwidth frozen at the unperturbed batch so the analytic gradient's
  // constant-sigma convention matches the numeric differences
  Rng warm(0);
  ForwardResult fwd0 = model.forward(records, Mode::smooth(), warm);
  LabelSplit split0 = LabelSplit::from_labels(fwd0.batch.labels);
  Tensor pos = gather_rows(fwd0.fused.m_prime, split0.positives);
  Tensor neg = gather_rows(fwd0.fused.m_prime, split0.negatives);
  const double sigma = median_heuristic_bandwidth(pos.value(), neg.value());

  enum class Term { l_ic, l_no, l_ni, l_ce, total };
  auto term_loss = [&](Term term) {
    return [&model, &records, term, sigma]() -> Tensor {
      Rng rng(0);
      ForwardResult fwd = model.forward(records, Mode::smooth(), rng);
      LabelSplit split = LabelSplit::from_labels(fwd.batch.labels);
      switch (term) {
        case Term::l_ic:
          return interaction_loss(fwd.batch, *fwd.inter, fwd.fused).value;
        case Term::l_no:
          return news_overall_loss(fwd.fused.m_prime, split, sigma).value;
        case Term::l_ni:
          return news_internal_loss(fwd.fused.t_prime, fwd.fused.i_prime, split).value;
        case Term::l_ce:
          return cross_entropy(fwd.probs, fwd.batch.labels);
        case Term::total: {
          Tensor ic = interaction_loss(fwd.batch, *fwd.inter, fwd.fused).value;
          Tensor no = news_overall_loss(fwd.fused.m_prime, split, sigma).value;
          Tensor ni = news_internal_loss(fwd.fused.t_prime, fwd.fused.i_prime, split).value;
          Tensor ce = cross_entropy(fwd.probs, fwd.batch.labels);
          return total_loss(0.1, ic, no, ni, ce).value;
        }
      }
      throw contract_error("unreachable");
    };
  };

  NamedParams params = model.params();
  struct Row {
    const char* name;
    Term term;
  };
  const Row rows[] = {{"l_ic", Term::l_ic},
                      {"l_no", Term::l_no},
                      {"l_ni", Term::l_ni},
                      {"l_ce", Term::l_ce},
                      {"L", Term::total}};
  double worst_overall = 0;
  std::string worst_name;
  std::printf("gradient check: 4x8 synthetic batch, h=%.1e, tolerance %.1e\n", args.h,
              args.tolerance);
  for (const Row& row : rows) {
    std::vector<GradCheckEntry> entries;
    const double err = grad_check_params(term_loss(row.term), params, args.h, &entries);
    std::string offender;
    double offender_err = -1;
    for (const GradCheckEntry& e : entries)
      if (e.max_rel_err > offender_err) {
        offender_err = e.max_rel_err;
        offender = e.name;
      }
    std::printf("  %-5s max rel err %.3e  (worst: %s)\n", row.name, err, offender.c_str());
    if (err > worst_overall) {
      worst_overall = err;
      worst_name = std::string(row.name) + " via " + offender;
    }
  }
  const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("checked %zu parameter tensors in %.1f s\n", params.size(), dt);
  if (worst_overall > args.tolerance) {
    std::printf("FAIL: %s exceeds tolerance (%.3e > %.3e)\n", worst_name.c_str(), worst_overall,
                args.tolerance);
    return kCheckFailed;
  }
  std::printf("OK: max error %.3e within tolerance\n", worst_overall);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual-compensation multimodal news classifier"};
  app.set_version_flag("--version", kArtifactVersion);
  app.set_config("--config", "", "key=value config file; command-line flags win");
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "generate a synthetic embedding file");
  s->add_option("--out", synth.out, "output embedding file")->required();
  s->add_option("--real", synth.cfg.real_count, "real (label 1) record count");
  s->add_option("--fake", synth.cfg.fake_count, "fake (label 0) record count");
  s->add_option("--seed", synth.cfg.seed, "generator seed");
  s->add_option("--n1", synth.cfg.dims.n1, "fine-grained text width");
  s->add_option("--n2", synth.cfg.dims.n2, "fine-grained image width");
  s->add_option("--nraw", synth.cfg.dims.n_raw, "coarse width before projection");
  s->add_option("--N", synth.cfg.n_common, "common projection width (metadata only)");
  s->add_option("--delta", synth.cfg.delta, "class separation");
  s->add_option("--rho", synth.cfg.rho, "text/image latent coupling in [0,1]");
  s->add_option("--noise", synth.cfg.sigma_noise, "noise scale");

  TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "train a model on embedding files");
  t->add_option("--train", tr.train_path, "training embedding file")->required();
  t->add_option("--test", tr.test_path, "test embedding file")->required();
  t->add_option("--out", tr.out_dir, "run output directory")->required();
  t->add_option("--epochs", tr.cfg.epochs, "training epochs");
  t->add_option("--batch", tr.cfg.batch_size, "mini-batch size");
  t->add_option("--lr", tr.cfg.lr, "Adam learning rate");
  t->add_option("--lambda", tr.cfg.lambda, "interaction-constraint weight");
  t->add_option("--heads", tr.cfg.heads, "attention heads");
  t->add_option("--N", tr.cfg.n_common, "common projection width");
  t->add_option("--tau", tr.cfg.mask_tau, "soft-mask temperature");
  t->add_option("--bandwidth", tr.cfg.mmd_bandwidth,
                "fixed MMD kernel bandwidth (0 = median heuristic)");
  t->add_option("--seed", tr.cfg.seed, "run seed");
  t->add_option("--ablate", tr.ablations,
                "ablation variants: no_l_ic no_l_no no_l_ni no_mrc no_mgc no_dfr "
                "image_only text_only");
  t->add_flag("--image-only", tr.image_only, "classify on image features only");
  t->add_flag("--text-only", tr.text_only, "classify on text features only");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "evaluate a saved model");
  e->add_option("--params", ev.params_path, "model snapshot (.rcps)")->required();
  e->add_option("--data", ev.data_path, "embedding file")->required();
  e->add_option("--out", ev.out_path, "metrics JSON output");
  e->add_option("--batch", ev.batch_size, "evaluation batch size");
  e->add_option("--dump-features", ev.features_path, "fused-feature CSV output");
  e->add_option("--dump-diagnostics", ev.diagnostics_dir,
                "directory for mask/gate CSV dumps of the first batch");

  GradcheckArgs gc;
  CLI::App* g = app.add_subcommand("gradcheck", "central-difference gradient audit");
  g->add_option("--tolerance", gc.tolerance, "max relative error allowed");
  g->add_option("--h", gc.h, "finite-difference step");
  g->add_option("--seed", gc.seed, "toy batch seed");

  try {
    app.parse(argc, argv);
    if (s->parsed()) return cmd_synth(synth);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (g->parsed()) return cmd_gradcheck(gc);
    return kConfigError;
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? kOk : kConfigError;
  } catch (const config_error& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return kConfigError;
  } catch (const data_error& ex) {
    std::fprintf(stderr, "data error: %s\n", ex.what());
    return kDataError;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kCheckFailed;
  }
}
