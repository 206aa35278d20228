#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "interpnet/data.hpp"
#include "interpnet/train.hpp"

namespace interpnet {

/// Probability that a random positive outranks a random negative; ties
/// count one half (Mann-Whitney).
inline double roc_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::runtime_error("roc_auc: bad input sizes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0, n_neg = 0;
  for (double y : labels) (y > 0.5 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw std::runtime_error("AUC undefined: single-class input");
  double u = 0.0, neg_below = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double tied_pos = 0, tied_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0.5 ? tied_pos : tied_neg) += 1;
      ++j;
    }
    u += tied_pos * (neg_below + 0.5 * tied_neg);
    neg_below += tied_neg;
    i = j;
  }
  return u / (n_pos * n_neg);
}

/// Average precision: sum of (R_i - R_{i-1}) * P_i over descending unique
/// score thresholds.
inline double auprc(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::runtime_error("auprc: bad input sizes");
  double n_pos = 0;
  for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
  if (n_pos == 0) throw std::runtime_error("AUPRC undefined: no positives");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double tp = 0, fp = 0, ap = 0.0, prev_tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0.5 ? tp : fp) += 1;
      ++j;
    }
    ap += ((tp - prev_tp) / n_pos) * (tp / (tp + fp));
    prev_tp = tp;
    i = j;
  }
  return ap;
}

inline double mean_cross_entropy(const std::vector<double>& probs,
                                 const std::vector<double>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw std::runtime_error("mean_cross_entropy: bad input sizes");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    sum += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p));
  }
  return sum / probs.size();
}

/// Median absolute error in days; inputs are log-days and get exponentiated
/// first. Even counts take the mean of the two middle residuals.
inline double median_abs_error_days(const std::vector<double>& pred_logdays,
                                    const std::vector<double>& true_logdays) {
  if (pred_logdays.size() != true_logdays.size() || pred_logdays.empty())
    throw std::runtime_error("median_abs_error_days: bad input sizes");
  std::vector<double> err(pred_logdays.size());
  for (std::size_t i = 0; i < err.size(); ++i)
    err[i] = std::abs(std::exp(pred_logdays[i]) - std::exp(true_logdays[i]));
  std::sort(err.begin(), err.end());
  const std::size_t n = err.size();
  return n % 2 == 1 ? err[n / 2] : 0.5 * (err[n / 2 - 1] + err[n / 2]);
}

/// 1 - Var(residual)/Var(target), population variances.
inline double explained_variance(const std::vector<double>& pred,
                                 const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::runtime_error("explained_variance: bad input sizes");
  auto var = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / v.size();
  };
  std::vector<double> resid(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) resid[i] = truth[i] - pred[i];
  const double vt = var(truth);
  if (vt <= 0.0) throw std::runtime_error("explained variance undefined: constant targets");
  return 1.0 - var(resid) / vt;
}

// ---- evaluation protocol ----------------------------------------------------

struct MetricReport {
  Task task = Task::classification;
  std::vector<std::map<std::string, double>> folds;
  std::map<std::string, double> mean, stddev;
  std::string config_fingerprint;

  void finalize() {
    mean.clear();
    stddev.clear();
    if (folds.empty()) return;
    for (const auto& [k, _] : folds.front()) {
      double m = 0.0;
      for (const auto& f : folds) m += f.at(k);
      m /= folds.size();
      double s = 0.0;
      for (const auto& f : folds) s += (f.at(k) - m) * (f.at(k) - m);
      mean[k] = m;
      stddev[k] = std::sqrt(s / folds.size());
    }
  }

  json to_json() const {
    json jf = json::array();
    for (const auto& f : folds) jf.push_back(f);
    return {{"task", task_name(task)},
            {"folds", jf},
            {"mean", mean},
            {"std", stddev},
            {"config_fingerprint", config_fingerprint}};
  }
};

inline std::string config_fingerprint(const ModelConfig& mc, const TrainConfig& tc,
                                      std::uint64_t seed) {
  json j = {{"model", mc.to_json()}, {"train", tc.to_json()}, {"seed", seed}};
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

inline std::map<std::string, double> score_split(const Model& m, const Dataset& test,
                                                 const ReferenceGrid& grid) {
  std::vector<double> preds, truths;
  preds.reserve(test.size());
  for (const auto& s : test.samples) {
    preds.push_back(predict(m, s, grid));
    truths.push_back(s.y);
  }
  std::map<std::string, double> out;
  if (test.task == Task::classification) {
    out["auc"] = roc_auc(preds, truths);
    out["auprc"] = auprc(preds, truths);
    out["loss"] = mean_cross_entropy(preds, truths);
  } else {
    out["medae_days"] = median_abs_error_days(preds, truths);
    out["ev"] = explained_variance(preds, truths);
  }
  return out;
}

/// Trains one model per fold (stats, z-scoring, and imputation all derived
/// from that fold's training split) and scores the held-out test fold.
inline MetricReport kfold_evaluate(const Dataset& ds, const ModelConfig& mc,
                                   const TrainConfig& tc, int k, std::uint64_t seed) {
  MetricReport report;
  report.task = ds.task;
  report.config_fingerprint = config_fingerprint(mc, tc, seed);
  const auto splits = split_kfold(ds, k, seed, tc.val_fraction);
  const auto grid = ReferenceGrid::uniform(mc.refs);
  for (int f = 0; f < k; ++f) {
    const Dataset train_raw = subset(ds, splits[f].train);
    const auto stats = global_channel_stats(train_raw);
    const Dataset train = prepare_dataset(train_raw, stats);
    const Dataset val = prepare_dataset(subset(ds, splits[f].val), stats);
    const Dataset test = prepare_dataset(subset(ds, splits[f].test), stats);
    TrainConfig fold_tc = tc;
    fold_tc.seed = mix_seed(seed, 0xf01du, f);
    Model model = make_model(mc, mix_seed(fold_tc.seed, 0x111u));
    const auto fitres = fit(train, val, std::move(model), fold_tc);
    report.folds.push_back(score_split(fitres.best, test, grid));
  }
  report.finalize();
  return report;
}

/// Canonical ordering of the seven non-empty output subsets.
inline std::vector<ChannelSelection> ablation_selections() {
  return {
      {true, true, true},    // SI,T,I
      {true, false, true},   // SI,I
      {true, true, false},   // SI,T
      {true, false, false},  // SI
      {false, false, true},  // I
      {false, true, true},   // I,T
      {false, true, false},  // T
  };
}

inline std::string ablation_label(const ChannelSelection& sel) {
  // Match the canonical table labels ("I,T" rather than selection order).
  if (!sel.smooth && sel.transient && sel.intensity) return "I,T";
  return sel.to_string();
}

/// One k-fold evaluation per non-empty subset of {SI, T, I}, in the
/// canonical order.
inline std::vector<std::pair<std::string, MetricReport>> ablation_suite(
    const Dataset& ds, ModelConfig mc, const TrainConfig& tc, int k, std::uint64_t seed) {
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& sel : ablation_selections()) {
    mc.sel = sel;
    rows.emplace_back(ablation_label(sel), kfold_evaluate(ds, mc, tc, k, seed));
  }
  return rows;
}

}  // namespace interpnet
