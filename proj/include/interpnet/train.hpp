#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "interpnet/data.hpp"
#include "interpnet/model.hpp"

namespace interpnet {

struct LossWeights {
  double delta_i = 1e-5;  // l2 on interpolation parameters
  double delta_p = 1e-5;  // l2 on prediction parameters
  double delta_r = 1.0;   // reconstruction weight
};

struct TrainConfig {
  int epochs = 100;
  int batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double mask_fraction = 0.2;
  int patience = 10;
  std::uint64_t seed = 0;
  LossWeights weights;
  double val_fraction = 0.15;
  bool clip = false;          // optional global-norm safety net
  double clip_norm = 100.0;

  json to_json() const {
    return {{"epochs", epochs},       {"batch", batch},
            {"lr", lr},               {"beta1", beta1},
            {"beta2", beta2},         {"adam_eps", adam_eps},
            {"mask_fraction", mask_fraction}, {"patience", patience},
            {"seed", seed},           {"delta_i", weights.delta_i},
            {"delta_p", weights.delta_p},     {"delta_r", weights.delta_r},
            {"val_fraction", val_fraction},   {"clip", clip},
            {"clip_norm", clip_norm}};
  }
  static TrainConfig from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch = j.at("batch").get<int>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.mask_fraction = j.at("mask_fraction").get<double>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.weights.delta_i = j.at("delta_i").get<double>();
    c.weights.delta_p = j.at("delta_p").get<double>();
    c.weights.delta_r = j.at("delta_r").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.clip = j.at("clip").get<bool>();
    c.clip_norm = j.at("clip_norm").get<double>();
    return c;
  }
};

/// Mean squared error between held-out observations and their smooth
/// cross-channel reconstructions; 0 when nothing is masked.
inline double interpolation_loss(const Sample& s, const MaskAssignment& mask,
                                 const InterpParams& params) {
  const auto queries = mask_queries(s, mask);
  if (queries.empty()) return 0.0;
  const auto pred = reconstruct_at(params, s, queries, &mask);
  double sum = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double e = pred[q] - queries[q].x;
    sum += e * e;
  }
  return sum / queries.size();
}

namespace detail {

inline double l2_terms(const std::vector<double>& flat, std::size_t n_theta,
                       const LossWeights& w) {
  double t = 0.0, p = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i)
    (i < n_theta ? t : p) += flat[i] * flat[i];
  return w.delta_i * t + w.delta_p * p;
}

}  // namespace detail

/// Composite objective over a batch: mean prediction loss + l2 regularizers
/// + delta_R * mean per-sample reconstruction loss.
inline double composite_loss(const Model& m, const std::vector<const Sample*>& batch,
                             const std::vector<const MaskAssignment*>& masks,
                             const ReferenceGrid& grid, const LossWeights& w) {
  if (batch.empty()) throw std::runtime_error("empty batch");
  double pred = 0.0, recon = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ev = eval_sample(m, *batch[i], grid, masks[i]);
    pred += ev.pred_loss;
    recon += ev.recon_loss;
  }
  const double n = static_cast<double>(batch.size());
  return pred / n + w.delta_r * recon / n +
         detail::l2_terms(flatten_params(m), theta_count(m), w);
}

struct BatchGrad {
  double loss = 0.0;
  std::vector<double> grad;  // flat, same order as flatten_params
};

/// Loss and exact gradient of the composite objective over a batch.
/// Samples are processed in order; the reduction is deterministic.
inline BatchGrad compute_batch(const Model& m, const std::vector<const Sample*>& batch,
                               const std::vector<const MaskAssignment*>& masks,
                               const ReferenceGrid& grid, const LossWeights& w) {
  if (batch.empty()) throw std::runtime_error("empty batch");
  Model grads = zero_like(m);
  const double n = static_cast<double>(batch.size());
  double pred = 0.0, recon = 0.0;
  EvalCaches caches;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ev = eval_sample(m, *batch[i], grid, masks[i], &caches);
    pred += ev.pred_loss;
    recon += ev.recon_loss;
    backward_sample(m, *batch[i], caches, 1.0 / n, w.delta_r / n, grads);
  }
  BatchGrad out;
  out.grad = flatten_params(grads);
  const auto flat = flatten_params(m);
  const std::size_t nt = theta_count(m);
  for (std::size_t i = 0; i < flat.size(); ++i)
    out.grad[i] += 2.0 * (i < nt ? w.delta_i : w.delta_p) * flat[i];
  out.loss = pred / n + w.delta_r * recon / n + detail::l2_terms(flat, nt, w);
  return out;
}

// ---- Adam ------------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

inline void adam_step(AdamState& st, std::vector<double>& params, const std::vector<double>& grad,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (params.size() != grad.size() || params.size() != st.m.size())
    throw std::runtime_error("adam_step shape mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(beta1, st.step);
  const double c2 = 1.0 - std::pow(beta2, st.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

// ---- training loop ---------------------------------------------------------

inline MaskAssignment batch_mask(const Sample& s, double fraction, std::uint64_t epoch_seed,
                                 std::size_t batch_index) {
  return sample_mask(s, fraction,
                     mix_seed(epoch_seed, batch_index + 1, fnv1a64(s.id)));
}

/// One optimization step: fresh hold-out masks, composite loss and gradient
/// over the batch, one Adam update. Deterministic given the seeds.
inline double train_step(Model& m, AdamState& st, const std::vector<const Sample*>& batch,
                         const ReferenceGrid& grid, const TrainConfig& tc,
                         std::uint64_t epoch_seed, std::size_t batch_index) {
  std::vector<MaskAssignment> masks;
  masks.reserve(batch.size());
  for (const Sample* s : batch) masks.push_back(batch_mask(*s, tc.mask_fraction, epoch_seed, batch_index));
  std::vector<const MaskAssignment*> mp;
  for (const auto& mm : masks) mp.push_back(&mm);
  auto bg = compute_batch(m, batch, mp, grid, tc.weights);
  if (tc.clip) {
    double norm = 0.0;
    for (double g : bg.grad) norm += g * g;
    norm = std::sqrt(norm);
    if (norm > tc.clip_norm)
      for (double& g : bg.grad) g *= tc.clip_norm / norm;
  }
  auto flat = flatten_params(m);
  adam_step(st, flat, bg.grad, tc.lr, tc.beta1, tc.beta2, tc.adam_eps);
  unflatten_params(m, flat);
  return bg.loss;
}

inline double mean_prediction_loss(const Model& m, const Dataset& ds, const ReferenceGrid& grid) {
  double sum = 0.0;
  for (const auto& s : ds.samples) sum += eval_sample(m, s, grid).pred_loss;
  return sum / ds.size();
}

struct FitResult {
  Model best;
  int best_epoch = -1;
  double best_val = 0.0;
  std::vector<std::array<double, 3>> history;  // epoch, train loss, val loss
};

/// Epoch loop with shuffled minibatches and early stopping on the validation
/// prediction loss; returns the best model seen.
inline FitResult fit(const Dataset& train, const Dataset& val, Model model, const TrainConfig& tc,
                     std::ostream* log = nullptr) {
  if (train.samples.empty() || val.samples.empty())
    throw std::runtime_error("fit requires non-empty train and validation splits");
  const auto grid = ReferenceGrid::uniform(model.cfg.refs);
  AdamState st;
  FitResult res;
  res.best = model;
  res.best_val = mean_prediction_loss(model, val, grid);
  int stale = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(tc.seed, 0xe90c4u, epoch);
    auto rng = make_rng(mix_seed(epoch_seed, 0x5u));
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + tc.batch); ++i)
        batch.push_back(&train.samples[order[i]]);
      train_loss += train_step(model, st, batch, grid, tc, epoch_seed, n_batches);
      ++n_batches;
    }
    train_loss /= n_batches;
    const double val_loss = mean_prediction_loss(model, val, grid);
    res.history.push_back({static_cast<double>(epoch), train_loss, val_loss});
    if (log) (*log) << epoch << ", " << train_loss << ", " << val_loss << "\n";
    if (val_loss < res.best_val) {
      res.best_val = val_loss;
      res.best = model;
      res.best_epoch = epoch;
      stale = 0;
    } else if (++stale > tc.patience) {
      break;
    }
  }
  return res;
}

// ---- gradient verification --------------------------------------------------

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

/// Central-difference check of the full composite loss against the analytic
/// gradient, every scalar parameter, fixed mask. Returns the max relative
/// error; optionally reports the max per parameter group.
inline double grad_check(const Model& model, const Sample& s, const MaskAssignment& mask,
                         const LossWeights& w, double eps = 1e-5,
                         std::map<std::string, double>* per_group = nullptr) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::runtime_error("grad_check eps out of range");
  const auto grid = ReferenceGrid::uniform(model.cfg.refs);
  const std::vector<const Sample*> batch{&s};
  const std::vector<const MaskAssignment*> masks{&mask};
  const auto analytic = compute_batch(model, batch, masks, grid, w).grad;

  Model probe = model;
  auto flat = flatten_params(model);
  const auto groups = param_groups(model);
  double worst = 0.0;
  for (const auto& g : groups) {
    double gw = 0.0;
    for (std::size_t i = g.offset; i < g.offset + g.size; ++i) {
      const double saved = flat[i];
      flat[i] = saved + eps;
      unflatten_params(probe, flat);
      const double fp = composite_loss(probe, batch, masks, grid, w);
      flat[i] = saved - eps;
      unflatten_params(probe, flat);
      const double fm = composite_loss(probe, batch, masks, grid, w);
      flat[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      gw = std::max(gw, rel_error(analytic[i], numeric));
    }
    if (per_group) (*per_group)[g.name] = gw;
    worst = std::max(worst, gw);
  }
  return worst;
}

/// Generic central-difference gradient for a scalar function; used to
/// validate the checking harness itself.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double fp = f(x);
    x[i] = saved - eps;
    const double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// ---- checkpoints ------------------------------------------------------------

struct Checkpoint {
  int schema_version = 1;
  Model model;
  ChannelStats stats;
  TrainConfig train_config;
  double best_val = 0.0;
};

inline json checkpoint_to_json(const Checkpoint& cp) {
  json arrays = json::object();
  auto put = [&arrays](const std::string& name, const std::vector<double>& v,
                       std::vector<std::size_t> shape) {
    arrays[name] = {{"shape", shape}, {"data", v}};
  };
  const auto& m = cp.model;
  const std::size_t D = static_cast<std::size_t>(m.cfg.channels);
  const std::size_t H = static_cast<std::size_t>(m.cfg.hidden);
  const std::size_t I = static_cast<std::size_t>(m.cfg.gru_input());
  put("log_alpha", m.interp.log_alpha, {D});
  put("rho", m.interp.rho, {D, D});
  put("gru.Wz", m.gru.Wz, {H, I});
  put("gru.Uz", m.gru.Uz, {H, H});
  put("gru.bz", m.gru.bz, {H});
  put("gru.Wr", m.gru.Wr, {H, I});
  put("gru.Ur", m.gru.Ur, {H, H});
  put("gru.br", m.gru.br, {H});
  put("gru.Wh", m.gru.Wh, {H, I});
  put("gru.Uh", m.gru.Uh, {H, H});
  put("gru.bh", m.gru.bh, {H});
  put("chead.w", m.chead.w, {H});
  put("chead.b", {m.chead.b}, {1});
  put("rhead.W1", m.rhead.W1, {static_cast<std::size_t>(m.rhead.units), H});
  put("rhead.b1", m.rhead.b1, {static_cast<std::size_t>(m.rhead.units)});
  put("rhead.w2", m.rhead.w2, {static_cast<std::size_t>(m.rhead.units)});
  put("rhead.b2", {m.rhead.b2}, {1});

  json stats = {{"mean", cp.stats.mean},
                {"stddev", cp.stats.stddev},
                {"degenerate", std::vector<int>(cp.stats.degenerate.begin(),
                                                cp.stats.degenerate.end())}};
  return {{"schema_version", cp.schema_version},
          {"model", m.cfg.to_json()},
          {"params", arrays},
          {"stats", stats},
          {"train_config", cp.train_config.to_json()},
          {"best_val", cp.best_val}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint cp;
  cp.schema_version = j.at("schema_version").get<int>();
  if (cp.schema_version != 1)
    throw std::runtime_error("unsupported checkpoint schema version " +
                             std::to_string(cp.schema_version));
  cp.model.cfg = ModelConfig::from_json(j.at("model"));
  cp.model.interp.kappa = cp.model.cfg.kappa;
  cp.model.rhead.hidden = cp.model.cfg.hidden;
  const auto& arrays = j.at("params");
  auto get = [&arrays](const std::string& name) {
    return arrays.at(name).at("data").get<std::vector<double>>();
  };
  cp.model.interp.log_alpha = get("log_alpha");
  cp.model.interp.rho = get("rho");
  cp.model.gru.input = cp.model.cfg.gru_input();
  cp.model.gru.hidden = cp.model.cfg.hidden;
  cp.model.gru.Wz = get("gru.Wz");
  cp.model.gru.Uz = get("gru.Uz");
  cp.model.gru.bz = get("gru.bz");
  cp.model.gru.Wr = get("gru.Wr");
  cp.model.gru.Ur = get("gru.Ur");
  cp.model.gru.br = get("gru.br");
  cp.model.gru.Wh = get("gru.Wh");
  cp.model.gru.Uh = get("gru.Uh");
  cp.model.gru.bh = get("gru.bh");
  cp.model.chead.w = get("chead.w");
  cp.model.chead.b = get("chead.b").at(0);
  cp.model.rhead.W1 = get("rhead.W1");
  cp.model.rhead.b1 = get("rhead.b1");
  cp.model.rhead.w2 = get("rhead.w2");
  cp.model.rhead.b2 = get("rhead.b2").at(0);
  cp.model.rhead.units = static_cast<int>(cp.model.rhead.b1.size());
  cp.stats.mean = j.at("stats").at("mean").get<std::vector<double>>();
  cp.stats.stddev = j.at("stats").at("stddev").get<std::vector<double>>();
  for (int v : j.at("stats").at("degenerate").get<std::vector<int>>())
    cp.stats.degenerate.push_back(v != 0);
  cp.train_config = TrainConfig::from_json(j.at("train_config"));
  cp.best_val = j.at("best_val").get<double>();
  return cp;
}

inline void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(cp).dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint parse error: " + std::string(e.what()));
  }
  return checkpoint_from_json(j);
}

}  // namespace interpnet
