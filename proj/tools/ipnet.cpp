// Command-line front end: synthesize datasets, train, evaluate, run the
// channel-subset ablation, verify gradients, and emit predictions.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "interpnet/metrics.hpp"
#include "interpnet/synth.hpp"

namespace {

using namespace interpnet;

/// Usage/config problems exit 2; runtime failures exit 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string data, out;
  std::string channels = "si,t,i";
  std::string baseline = "none";
  int refs = 64, hidden = 64, bins = 64;
  int epochs = 100, batch = 32, patience = 10, kfold = 0;
  double lr = 1e-3, delta_r = 1.0, delta_i = 1e-5, delta_p = 1e-5;
  double mask_frac = 0.2, kappa = 10.0, val_frac = 0.15;
  std::uint64_t seed = 0;

  void attach(CLI::App& app, bool need_data, bool need_out) {
    auto* d = app.add_option("--data", data, "input dataset (JSON-Lines)");
    if (need_data) d->required();
    auto* o = app.add_option("--out", out, "output path");
    if (need_out) o->required();
    app.add_option("--channels", channels, "interpolation outputs fed to the GRU (subset of si,t,i)");
    app.add_option("--refs", refs, "reference grid size T");
    app.add_option("--hidden", hidden, "GRU hidden units");
    app.add_option("--epochs", epochs, "max training epochs");
    app.add_option("--batch", batch, "minibatch size");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--delta-r", delta_r, "reconstruction loss weight");
    app.add_option("--delta-i", delta_i, "l2 weight on interpolation parameters");
    app.add_option("--delta-p", delta_p, "l2 weight on prediction parameters");
    app.add_option("--mask-frac", mask_frac, "hold-out fraction per channel");
    app.add_option("--patience", patience, "early-stopping patience (epochs)");
    app.add_option("--kfold", kfold, "number of cross-validation folds");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--kappa", kappa, "non-smooth bandwidth multiplier");
    app.add_option("--bins", bins, "discretization bins for baselines");
    app.add_option("--baseline", baseline, "discretized baseline: none, m, f, or s");
    app.add_option("--val-frac", val_frac, "validation fraction of the training split");
  }

  ModelConfig model_config(const Dataset& ds) const {
    ModelConfig mc;
    mc.task = ds.task;
    mc.channels = static_cast<int>(ds.dim());
    mc.refs = refs;
    mc.hidden = hidden;
    mc.sel = ChannelSelection::parse(channels);
    mc.kappa = kappa;
    mc.baseline = parse_baseline(baseline);
    mc.bins = bins;
    if (refs < 2 || hidden < 1 || bins < 1) throw ConfigError("invalid model dimensions");
    if (kappa <= 1.0) throw ConfigError("kappa must be > 1");
    return mc;
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch = batch;
    tc.lr = lr;
    tc.mask_fraction = mask_frac;
    tc.patience = patience;
    tc.seed = seed;
    tc.weights = {delta_i, delta_p, delta_r};
    tc.val_fraction = val_frac;
    if (epochs < 0 || batch < 1) throw ConfigError("invalid training dimensions");
    if (!(mask_frac > 0.0 && mask_frac < 1.0)) throw ConfigError("mask fraction outside (0,1)");
    if (!(val_frac > 0.0 && val_frac < 1.0)) throw ConfigError("val fraction outside (0,1)");
    return tc;
  }
};

/// Stratified single train/validation split (indices into ds).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split(
    const Dataset& ds, double val_fraction, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> strata(ds.task == Task::classification ? 2 : 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t g = (ds.task == Task::classification && ds.samples[i].y > 0.5) ? 1 : 0;
    strata[g % strata.size()].push_back(i);
  }
  std::vector<std::size_t> train, val;
  for (std::size_t g = 0; g < strata.size(); ++g) {
    auto rng = make_rng(mix_seed(seed, 0x7a11u, g));
    std::shuffle(strata[g].begin(), strata[g].end(), rng);
    std::size_t nv = static_cast<std::size_t>(std::llround(val_fraction * strata[g].size()));
    if (strata[g].size() > 1) nv = std::max<std::size_t>(nv, 1);
    nv = std::min(nv, strata[g].empty() ? 0 : strata[g].size() - 1);
    for (std::size_t i = 0; i < strata[g].size(); ++i)
      (i < nv ? val : train).push_back(strata[g][i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  if (train.empty() || val.empty()) throw ConfigError("dataset too small to split");
  return {train, val};
}

int cmd_synth(const std::string& config_path, const std::string& out_path, std::uint64_t seed) {
  SynthConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config: " + config_path);
      json j;
      in >> j;
      cfg = SynthConfig::from_json(j);
    }
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const Dataset ds = synthesize(cfg, seed);
  save_dataset(ds, out_path);
  std::cout << "wrote " << ds.size() << " samples to " << out_path << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f) {
  const Dataset raw = load_dataset(f.data);
  const ModelConfig mc = f.model_config(raw);
  const TrainConfig tc = f.train_config();

  const auto [ti, vi] = train_val_split(raw, tc.val_fraction, tc.seed);
  const Dataset train_raw = subset(raw, ti);
  const auto stats = global_channel_stats(train_raw);
  const Dataset train = prepare_dataset(train_raw, stats);
  const Dataset val = prepare_dataset(subset(raw, vi), stats);

  Model model = make_model(mc, mix_seed(tc.seed, 0x111u));
  const auto res = fit(train, val, std::move(model), tc, &std::cout);
  Checkpoint cp{1, res.best, stats, tc, res.best_val};
  save_checkpoint(cp, f.out);
  std::cout << "best validation loss " << res.best_val << " (epoch " << res.best_epoch
            << "); checkpoint written to " << f.out << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint_path,
             const std::string& metrics_path) {
  const Dataset raw = load_dataset(f.data);
  MetricReport report;
  if (f.kfold > 0) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    if (cp.model.cfg.task != raw.task) throw ConfigError("checkpoint task does not match dataset");
    report = kfold_evaluate(raw, cp.model.cfg, cp.train_config, f.kfold, f.seed);
  } else {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    if (cp.model.cfg.task != raw.task) throw ConfigError("checkpoint task does not match dataset");
    const Dataset ds = prepare_dataset(raw, cp.stats);
    report.task = ds.task;
    report.config_fingerprint = config_fingerprint(cp.model.cfg, cp.train_config, f.seed);
    report.folds.push_back(score_split(cp.model, ds, ReferenceGrid::uniform(cp.model.cfg.refs)));
    report.finalize();
  }
  std::ofstream out(metrics_path);
  if (!out) throw std::runtime_error("cannot write metrics: " + metrics_path);
  out << report.to_json().dump(2) << "\n";
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

const std::array<const char*, 5> kMetricColumns = {"auc", "auprc", "loss", "medae_days", "ev"};

void print_ablation_table(
    std::ostream& os,
    const std::vector<std::pair<std::string, std::map<std::string, double>>>& rows) {
  os << "channels    auc       auprc     loss      medae     ev\n";
  for (const auto& [label, vals] : rows) {
    char line[160];
    int n = std::snprintf(line, sizeof(line), "%-10s", label.c_str());
    for (const char* col : kMetricColumns) {
      const auto it = vals.find(col);
      if (it == vals.end())
        n += std::snprintf(line + n, sizeof(line) - n, "  %-8s", "-");
      else
        n += std::snprintf(line + n, sizeof(line) - n, "  %-8.4f", it->second);
    }
    os << line << "\n";
  }
}

int cmd_ablate(const CommonFlags& f, const std::string& reg_data_path) {
  const int k = f.kfold > 0 ? f.kfold : 5;
  const Dataset ds = load_dataset(f.data);
  const TrainConfig tc = f.train_config();
  auto rows = ablation_suite(ds, f.model_config(ds), tc, k, f.seed);

  std::vector<std::pair<std::string, std::map<std::string, double>>> merged;
  for (const auto& [label, rep] : rows) merged.emplace_back(label, rep.mean);
  json jrows = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i)
    jrows.push_back({{"channels", rows[i].first}, {"report", rows[i].second.to_json()}});

  if (!reg_data_path.empty()) {
    // A second, regression-task dataset fills the medae/ev columns.
    const Dataset reg = load_dataset(reg_data_path);
    if (reg.task != Task::regression) throw ConfigError("--reg-data must hold a regression task");
    auto reg_rows = ablation_suite(reg, f.model_config(reg), tc, k, f.seed);
    for (std::size_t i = 0; i < merged.size(); ++i) {
      for (const auto& [key, v] : reg_rows[i].second.mean) merged[i].second[key] = v;
      jrows[i]["regression_report"] = reg_rows[i].second.to_json();
    }
  }

  print_ablation_table(std::cout, merged);
  if (!f.out.empty()) {
    std::ofstream out(f.out);
    if (!out) throw std::runtime_error("cannot write table: " + f.out);
    out << jrows.dump(2) << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double eps) {
  // Self-contained random instance: 3 channels, 10 reference points,
  // 8 hidden units, ~8 observations per channel, fixed hold-out mask.
  ModelConfig mc;
  mc.task = Task::classification;
  mc.channels = 3;
  mc.refs = 10;
  mc.hidden = 8;
  const Model model = make_model(mc, mix_seed(seed, 0x6cu));

  auto rng = make_rng(mix_seed(seed, 0x5a3u));
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  std::normal_distribution<double> ux(0.0, 1.0);
  Sample s;
  s.id = "gradcheck";
  s.y = 1.0;
  s.channels.resize(mc.channels);
  for (auto& ch : s.channels) {
    std::vector<double> t;
    for (int j = 0; j < 8; ++j) t.push_back(ut(rng));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    ch.t = t;
    for (std::size_t j = 0; j < t.size(); ++j) ch.x.push_back(ux(rng));
  }
  const MaskAssignment mask = sample_mask(s, 0.25, mix_seed(seed, 0x915u));

  LossWeights w;  // defaults: delta_i = delta_p = 1e-5, delta_r = 1
  std::map<std::string, double> per_group;
  const double worst = grad_check(model, s, mask, w, eps, &per_group);
  std::cout << "eps " << eps << "\n";
  for (const auto& [name, err] : per_group)
    std::cout << "  " << name << ": max relative error " << err << "\n";
  std::cout << "overall max relative error " << worst << "\n";
  const bool ok = worst < 1e-4;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_predict(const CommonFlags& f, const std::string& checkpoint_path) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  const Dataset raw = load_dataset(f.data);
  if (cp.model.cfg.task != raw.task) throw ConfigError("checkpoint task does not match dataset");
  if (static_cast<int>(raw.dim()) != cp.model.cfg.channels)
    throw ConfigError("checkpoint channel count does not match dataset");
  const Dataset ds = prepare_dataset(raw, cp.stats);
  const auto grid = ReferenceGrid::uniform(cp.model.cfg.refs);
  std::ofstream out(f.out);
  if (!out) throw std::runtime_error("cannot write predictions: " + f.out);
  for (const auto& s : ds.samples) {
    json j = {{"id", s.id}, {"prediction", predict(cp.model, s, grid)}};
    out << j.dump() << "\n";
  }
  std::cout << "wrote " << ds.size() << " predictions to " << f.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interpolation-prediction networks for sparse multivariate time series"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_config, synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--config", synth_config, "synthesis config (JSON)");
  synth->add_option("--out", synth_out, "output dataset path")->required();
  synth->add_option("--seed", synth_seed, "random seed");

  CommonFlags train_f;
  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint");
  train_f.attach(*train, /*need_data=*/true, /*need_out=*/true);

  CommonFlags eval_f;
  std::string eval_ckpt, eval_metrics;
  auto* eval = app.add_subcommand("eval", "score a checkpoint (or run k-fold retraining)");
  eval_f.attach(*eval, true, false);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--metrics", eval_metrics, "metrics JSON output path")->required();

  CommonFlags abl_f;
  std::string abl_reg;
  auto* ablate = app.add_subcommand("ablate", "k-fold evaluation of all channel subsets");
  abl_f.attach(*ablate, true, false);
  ablate->add_option("--reg-data", abl_reg, "regression dataset for the medae/ev columns");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::uint64_t gc_seed = 0;
  double gc_eps = 1e-5;
  gradcheck->add_option("--seed", gc_seed, "random seed");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step");

  CommonFlags pred_f;
  std::string pred_ckpt;
  auto* predict = app.add_subcommand("predict", "per-sample predictions from a checkpoint");
  pred_f.attach(*predict, true, true);
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_seed);
    if (train->parsed()) return cmd_train(train_f);
    if (eval->parsed()) return cmd_eval(eval_f, eval_ckpt, eval_metrics);
    if (ablate->parsed()) return cmd_ablate(abl_f, abl_reg);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_eps);
    if (predict->parsed()) return cmd_predict(pred_f, pred_ckpt);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
