#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "interpnet/data.hpp"
#include "interpnet/gru.hpp"
#include "interpnet/interp.hpp"

namespace interpnet {

struct ModelConfig {
  Task task = Task::classification;
  int channels = 1;  // D
  int refs = 64;     // T
  int hidden = 64;   // H
  ChannelSelection sel;
  double kappa = 10.0;
  Baseline baseline = Baseline::none;
  int bins = 64;  // baseline discretization

  int gru_input() const {
    return baseline == Baseline::none ? channels * sel.count()
                                      : baseline_input_size(baseline, channels);
  }
  int steps() const { return baseline == Baseline::none ? refs : bins; }

  json to_json() const {
    return {{"task", task_name(task)}, {"channels", channels},   {"refs", refs},
            {"hidden", hidden},        {"sel", sel.to_string()}, {"kappa", kappa},
            {"baseline", baseline_name(baseline)}, {"bins", bins}};
  }
  static ModelConfig from_json(const json& j) {
    ModelConfig c;
    c.task = parse_task(j.at("task").get<std::string>());
    c.channels = j.at("channels").get<int>();
    c.refs = j.at("refs").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.sel = ChannelSelection::parse(j.at("sel").get<std::string>());
    c.kappa = j.at("kappa").get<double>();
    c.baseline = parse_baseline(j.at("baseline").get<std::string>());
    c.bins = j.at("bins").get<int>();
    return c;
  }
};

struct Model {
  ModelConfig cfg;
  InterpParams interp;
  GruParams gru;
  ClassHead chead;
  RegHead rhead;
};

inline Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model m;
  m.cfg = cfg;
  m.interp = InterpParams::init(cfg.channels, cfg.refs, cfg.kappa);
  m.gru = GruParams::init(cfg.gru_input(), cfg.hidden, mix_seed(seed, 1));
  m.chead = ClassHead::init(cfg.hidden, mix_seed(seed, 2));
  m.rhead = RegHead::init(cfg.hidden, mix_seed(seed, 3));
  return m;
}

// ---- flat parameter view ----------------------------------------------------
// Order: [log_alpha, rho] (interpolation path only), GRU gates, active head.
// The interpolation block is the theta slice for the l2 regularizer.

struct ParamGroup {
  std::string name;
  std::size_t offset = 0, size = 0;
};

namespace detail {

template <typename Fn>
void visit_params(Model& m, Fn&& fn) {
  if (m.cfg.baseline == Baseline::none) {
    fn("log_alpha", m.interp.log_alpha);
    fn("rho", m.interp.rho);
  }
  fn("gru.Wz", m.gru.Wz);
  fn("gru.Uz", m.gru.Uz);
  fn("gru.bz", m.gru.bz);
  fn("gru.Wr", m.gru.Wr);
  fn("gru.Ur", m.gru.Ur);
  fn("gru.br", m.gru.br);
  fn("gru.Wh", m.gru.Wh);
  fn("gru.Uh", m.gru.Uh);
  fn("gru.bh", m.gru.bh);
  if (m.cfg.task == Task::classification) {
    fn("chead.w", m.chead.w);
    std::vector<double> b{m.chead.b};
    fn("chead.b", b);
    m.chead.b = b[0];
  } else {
    fn("rhead.W1", m.rhead.W1);
    fn("rhead.b1", m.rhead.b1);
    fn("rhead.w2", m.rhead.w2);
    std::vector<double> b{m.rhead.b2};
    fn("rhead.b2", b);
    m.rhead.b2 = b[0];
  }
}

}  // namespace detail

inline std::vector<double> flatten_params(const Model& m) {
  std::vector<double> flat;
  detail::visit_params(const_cast<Model&>(m), [&flat](const char*, std::vector<double>& v) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  return flat;
}

inline void unflatten_params(Model& m, const std::vector<double>& flat) {
  std::size_t off = 0;
  detail::visit_params(m, [&flat, &off](const char*, std::vector<double>& v) {
    if (off + v.size() > flat.size()) throw std::runtime_error("flat parameter size mismatch");
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  });
  if (off != flat.size()) throw std::runtime_error("flat parameter size mismatch");
}

inline std::vector<ParamGroup> param_groups(const Model& m) {
  std::vector<ParamGroup> groups;
  std::size_t off = 0;
  detail::visit_params(const_cast<Model&>(m), [&](const char* name, std::vector<double>& v) {
    groups.push_back({name, off, v.size()});
    off += v.size();
  });
  return groups;
}

inline std::size_t param_count(const Model& m) { return flatten_params(m).size(); }

/// Size of the interpolation-parameter (theta) prefix of the flat vector.
inline std::size_t theta_count(const Model& m) {
  return m.cfg.baseline == Baseline::none
             ? m.interp.log_alpha.size() + m.interp.rho.size()
             : 0;
}

/// Gradient holder with the same shapes as the model; flattens identically.
inline Model zero_like(const Model& m) {
  Model g = m;
  detail::visit_params(g, [](const char*, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return g;
}

// ---- per-sample forward/backward -------------------------------------------

struct EvalCaches {
  InterpCache ic;
  std::vector<double> stack;
  GruCache gc;
  std::vector<double> h_T;
  RegCache reg;
  double logit = 0.0;  // classification pre-activation
  double yhat = 0.0;
  ReconCache rc;
  std::vector<double> recon_pred;
};

struct SampleEval {
  double yhat = 0.0;
  double pred_loss = 0.0;
  double recon_loss = 0.0;  // mean squared error over held-out points
};

inline double prediction_loss(double yhat, double y, Task task) {
  if (task == Task::classification) {
    const double p = std::clamp(yhat, 1e-15, 1.0 - 1e-15);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return (yhat - y) * (yhat - y);
}

/// Full forward pass for one sample: interpolation (or baseline features),
/// GRU, head, and (when a mask is active) reconstruction of held-out points.
inline SampleEval eval_sample(const Model& m, const Sample& s, const ReferenceGrid& grid,
                              const MaskAssignment* mask = nullptr,
                              EvalCaches* caches = nullptr) {
  EvalCaches local;
  EvalCaches& c = caches ? *caches : local;
  SampleEval out;

  if (m.cfg.baseline == Baseline::none) {
    c.stack = interp_forward(m.interp, s, grid, m.cfg.sel, mask, &c.ic);
    // stack is row-major (rows x T); the GRU consumes step-major columns.
    const int rows = static_cast<int>(stack_rows(m.cfg.channels, m.cfg.sel));
    const int T = grid.size();
    std::vector<double> steps(static_cast<std::size_t>(T) * rows);
    for (int k = 0; k < T; ++k)
      for (int i = 0; i < rows; ++i)
        steps[static_cast<std::size_t>(k) * rows + i] = c.stack[static_cast<std::size_t>(i) * T + k];
    c.h_T = gru_forward(m.gru, steps, T, &c.gc);
  } else {
    const auto steps = baseline_inputs(s, m.cfg.baseline, m.cfg.bins);
    c.h_T = gru_forward(m.gru, steps, m.cfg.bins, &c.gc);
  }

  if (m.cfg.task == Task::classification) {
    c.logit = class_logit(m.chead, c.h_T);
    c.yhat = logistic(c.logit);
    // numerically stable cross-entropy from the logit
    const double y = s.y;
    out.pred_loss = (c.logit > 0.0 ? c.logit : 0.0) - c.logit * y +
                    std::log1p(std::exp(-std::abs(c.logit)));
  } else {
    c.yhat = regress(m.rhead, c.h_T, &c.reg);
    out.pred_loss = (c.yhat - s.y) * (c.yhat - s.y);
  }
  out.yhat = c.yhat;

  if (mask && m.cfg.baseline == Baseline::none) {
    const auto queries = mask_queries(s, *mask);
    if (!queries.empty()) {
      c.recon_pred = reconstruct_at(m.interp, s, queries, mask, &c.rc);
      double sum = 0.0;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const double e = c.recon_pred[q] - queries[q].x;
        sum += e * e;
      }
      out.recon_loss = sum / queries.size();
    }
  }
  return out;
}

/// Reverse pass matching eval_sample. pred_scale and recon_scale multiply
/// the adjoints of the two loss terms; gradients accumulate into g.
inline void backward_sample(const Model& m, const Sample& s, const EvalCaches& c,
                            double pred_scale, double recon_scale, Model& g) {
  const int H = m.cfg.hidden;
  std::vector<double> dh(H, 0.0);

  if (m.cfg.task == Task::classification) {
    const double dlogit = pred_scale * (logistic(c.logit) - s.y);
    for (int i = 0; i < H; ++i) {
      g.chead.w[i] += dlogit * c.h_T[i];
      dh[i] += dlogit * m.chead.w[i];
    }
    g.chead.b += dlogit;
  } else {
    const double dy = pred_scale * 2.0 * (c.yhat - s.y);
    g.rhead.b2 += dy;
    for (int i = 0; i < m.rhead.units; ++i) {
      g.rhead.w2[i] += dy * c.reg.act[i];
      if (c.reg.act[i] <= 0.0) continue;  // rectifier inactive
      const double da = dy * m.rhead.w2[i];
      g.rhead.b1[i] += da;
      for (int j = 0; j < H; ++j) {
        g.rhead.W1[static_cast<std::size_t>(i) * H + j] += da * c.h_T[j];
        dh[j] += da * m.rhead.W1[static_cast<std::size_t>(i) * H + j];
      }
    }
  }

  GruGrads gg = GruGrads::zero(m.gru);
  std::vector<double> d_steps(c.gc.inputs.size(), 0.0);
  gru_backward(m.gru, c.gc, dh, gg, d_steps);
  auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  add(g.gru.Wz, gg.Wz);
  add(g.gru.Uz, gg.Uz);
  add(g.gru.bz, gg.bz);
  add(g.gru.Wr, gg.Wr);
  add(g.gru.Ur, gg.Ur);
  add(g.gru.br, gg.br);
  add(g.gru.Wh, gg.Wh);
  add(g.gru.Uh, gg.Uh);
  add(g.gru.bh, gg.bh);

  if (m.cfg.baseline != Baseline::none) return;  // discretized features have no parameters

  // transpose step-major input adjoints back onto the stack layout
  const int rows = static_cast<int>(stack_rows(m.cfg.channels, m.cfg.sel));
  const int T = c.gc.T;
  std::vector<double> stack_adj(static_cast<std::size_t>(rows) * T, 0.0);
  for (int k = 0; k < T; ++k)
    for (int i = 0; i < rows; ++i)
      stack_adj[static_cast<std::size_t>(i) * T + k] = d_steps[static_cast<std::size_t>(k) * rows + i];
  interp_backward(m.interp, c.ic, m.cfg.sel, stack_adj, g.interp.log_alpha, g.interp.rho);

  if (recon_scale != 0.0 && !c.rc.queries.empty()) {
    const double n = static_cast<double>(c.rc.queries.size());
    std::vector<double> adj(c.rc.queries.size());
    for (std::size_t q = 0; q < adj.size(); ++q)
      adj[q] = recon_scale * 2.0 * (c.recon_pred[q] - c.rc.queries[q].x) / n;
    reconstruct_backward(m.interp, c.rc, adj, g.interp.log_alpha, g.interp.rho);
  }
}

inline double predict(const Model& m, const Sample& s, const ReferenceGrid& grid) {
  return eval_sample(m, s, grid).yhat;
}

}  // namespace interpnet
