#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "interpnet/data.hpp"
#include "interpnet/rng.hpp"

namespace interpnet {

inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// GRU gate parameters. Convention: z and r are update/reset gates,
/// h_t = (1-z) * h_prev + z * tanh(W_h u + U_h (r*h_prev) + b_h).
struct GruParams {
  int input = 0, hidden = 0;
  std::vector<double> Wz, Wr, Wh;  // H x I, row-major
  std::vector<double> Uz, Ur, Uh;  // H x H
  std::vector<double> bz, br, bh;  // H

  static GruParams init(int input, int hidden, std::uint64_t seed) {
    GruParams p;
    p.input = input;
    p.hidden = hidden;
    auto rng = make_rng(seed);
    auto uniform = [&rng](std::vector<double>& v, std::size_t n, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      v.resize(n);
      for (double& x : v) x = u(rng);
    };
    const std::size_t HI = static_cast<std::size_t>(hidden) * input;
    const std::size_t HH = static_cast<std::size_t>(hidden) * hidden;
    const double wi = 1.0 / std::sqrt(static_cast<double>(input));
    const double wh = 1.0 / std::sqrt(static_cast<double>(hidden));
    uniform(p.Wz, HI, wi);
    uniform(p.Wr, HI, wi);
    uniform(p.Wh, HI, wi);
    uniform(p.Uz, HH, wh);
    uniform(p.Ur, HH, wh);
    uniform(p.Uh, HH, wh);
    p.bz.assign(hidden, 0.0);
    p.br.assign(hidden, 0.0);
    p.bh.assign(hidden, 0.0);
    return p;
  }
};

struct ClassHead {
  std::vector<double> w;  // H
  double b = 0.0;

  static ClassHead init(int hidden, std::uint64_t seed) {
    ClassHead h;
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(hidden)),
                                             1.0 / std::sqrt(static_cast<double>(hidden)));
    h.w.resize(hidden);
    for (double& x : h.w) x = u(rng);
    return h;
  }
};

/// Regression head: dense rectified layer with `units` outputs, then linear.
struct RegHead {
  int hidden = 0, units = 50;
  std::vector<double> W1;  // units x H
  std::vector<double> b1;  // units
  std::vector<double> w2;  // units
  double b2 = 0.0;

  static RegHead init(int hidden, std::uint64_t seed, int units = 50) {
    RegHead h;
    h.hidden = hidden;
    h.units = units;
    auto rng = make_rng(seed);
    auto uniform = [&rng](std::vector<double>& v, std::size_t n, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      v.resize(n);
      for (double& x : v) x = u(rng);
    };
    uniform(h.W1, static_cast<std::size_t>(units) * hidden, 1.0 / std::sqrt(double(hidden)));
    h.b1.assign(units, 0.0);
    uniform(h.w2, units, 1.0 / std::sqrt(double(units)));
    return h;
  }
};

struct GruCache {
  int T = 0;
  std::vector<double> inputs;   // T x I, step-major
  std::vector<double> h;        // (T+1) x H, h[0] = 0
  std::vector<double> z, r, c;  // T x H
};

inline void gru_step(const GruParams& p, const double* u, const double* h_prev, double* h_out,
                     double* z_out, double* r_out, double* c_out) {
  const int H = p.hidden, I = p.input;
  for (int i = 0; i < H; ++i) {
    double az = p.bz[i], ar = p.br[i];
    const double* wz = &p.Wz[static_cast<std::size_t>(i) * I];
    const double* wr = &p.Wr[static_cast<std::size_t>(i) * I];
    for (int j = 0; j < I; ++j) {
      az += wz[j] * u[j];
      ar += wr[j] * u[j];
    }
    const double* uz = &p.Uz[static_cast<std::size_t>(i) * H];
    const double* ur = &p.Ur[static_cast<std::size_t>(i) * H];
    for (int j = 0; j < H; ++j) {
      az += uz[j] * h_prev[j];
      ar += ur[j] * h_prev[j];
    }
    z_out[i] = logistic(az);
    r_out[i] = logistic(ar);
  }
  for (int i = 0; i < H; ++i) {
    double ah = p.bh[i];
    const double* wh = &p.Wh[static_cast<std::size_t>(i) * I];
    for (int j = 0; j < I; ++j) ah += wh[j] * u[j];
    const double* uh = &p.Uh[static_cast<std::size_t>(i) * H];
    for (int j = 0; j < H; ++j) ah += uh[j] * (r_out[j] * h_prev[j]);
    c_out[i] = std::tanh(ah);
    h_out[i] = (1.0 - z_out[i]) * h_prev[i] + z_out[i] * c_out[i];
  }
}

/// Runs the GRU over T step-major input slices from h_0 = 0; returns h_T.
inline std::vector<double> gru_forward(const GruParams& p, const std::vector<double>& inputs,
                                       int T, GruCache* cache = nullptr) {
  if (T < 1) throw std::runtime_error("gru_forward needs T >= 1");
  const int H = p.hidden, I = p.input;
  GruCache local;
  GruCache& c = cache ? *cache : local;
  c.T = T;
  c.inputs = inputs;
  c.h.assign(static_cast<std::size_t>(T + 1) * H, 0.0);
  c.z.assign(static_cast<std::size_t>(T) * H, 0.0);
  c.r = c.z;
  c.c = c.z;
  for (int k = 0; k < T; ++k)
    gru_step(p, &c.inputs[static_cast<std::size_t>(k) * I], &c.h[static_cast<std::size_t>(k) * H],
             &c.h[static_cast<std::size_t>(k + 1) * H], &c.z[static_cast<std::size_t>(k) * H],
             &c.r[static_cast<std::size_t>(k) * H], &c.c[static_cast<std::size_t>(k) * H]);
  return std::vector<double>(c.h.end() - H, c.h.end());
}

struct GruGrads {
  std::vector<double> Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;

  static GruGrads zero(const GruParams& p) {
    GruGrads g;
    g.Wz.assign(p.Wz.size(), 0.0);
    g.Wr.assign(p.Wr.size(), 0.0);
    g.Wh.assign(p.Wh.size(), 0.0);
    g.Uz.assign(p.Uz.size(), 0.0);
    g.Ur.assign(p.Ur.size(), 0.0);
    g.Uh.assign(p.Uh.size(), 0.0);
    g.bz.assign(p.bz.size(), 0.0);
    g.br.assign(p.br.size(), 0.0);
    g.bh.assign(p.bh.size(), 0.0);
    return g;
  }
};

/// Backpropagation through time. dh_T in; parameter gradients accumulate
/// into g; input adjoints (T x I, step-major) accumulate into d_inputs.
inline void gru_backward(const GruParams& p, const GruCache& c, const std::vector<double>& dh_T,
                         GruGrads& g, std::vector<double>& d_inputs) {
  const int H = p.hidden, I = p.input, T = c.T;
  std::vector<double> dh = dh_T;
  std::vector<double> dz(H), dc(H), dr(H), drh(H), dh_prev(H);
  for (int k = T - 1; k >= 0; --k) {
    const double* h_prev = &c.h[static_cast<std::size_t>(k) * H];
    const double* z = &c.z[static_cast<std::size_t>(k) * H];
    const double* r = &c.r[static_cast<std::size_t>(k) * H];
    const double* cc = &c.c[static_cast<std::size_t>(k) * H];
    const double* u = &c.inputs[static_cast<std::size_t>(k) * I];
    double* du = &d_inputs[static_cast<std::size_t>(k) * I];

    for (int i = 0; i < H; ++i) {
      dz[i] = dh[i] * (cc[i] - h_prev[i]);
      dc[i] = dh[i] * z[i] * (1.0 - cc[i] * cc[i]);  // through tanh
      dh_prev[i] = dh[i] * (1.0 - z[i]);
    }
    // candidate path
    std::fill(drh.begin(), drh.end(), 0.0);
    for (int i = 0; i < H; ++i) {
      const double d = dc[i];
      if (d == 0.0) continue;
      double* gw = &g.Wh[static_cast<std::size_t>(i) * I];
      for (int j = 0; j < I; ++j) {
        gw[j] += d * u[j];
        du[j] += d * p.Wh[static_cast<std::size_t>(i) * I + j];
      }
      double* gu = &g.Uh[static_cast<std::size_t>(i) * H];
      for (int j = 0; j < H; ++j) {
        gu[j] += d * r[j] * h_prev[j];
        drh[j] += d * p.Uh[static_cast<std::size_t>(i) * H + j];
      }
      g.bh[i] += d;
    }
    for (int i = 0; i < H; ++i) {
      dr[i] = drh[i] * h_prev[i] * r[i] * (1.0 - r[i]);  // through logistic
      dh_prev[i] += drh[i] * r[i];
      dz[i] *= z[i] * (1.0 - z[i]);
    }
    // gate paths
    for (int i = 0; i < H; ++i) {
      const double dzi = dz[i], dri = dr[i];
      if (dzi != 0.0) {
        double* gw = &g.Wz[static_cast<std::size_t>(i) * I];
        for (int j = 0; j < I; ++j) {
          gw[j] += dzi * u[j];
          du[j] += dzi * p.Wz[static_cast<std::size_t>(i) * I + j];
        }
        double* gu = &g.Uz[static_cast<std::size_t>(i) * H];
        for (int j = 0; j < H; ++j) {
          gu[j] += dzi * h_prev[j];
          dh_prev[j] += dzi * p.Uz[static_cast<std::size_t>(i) * H + j];
        }
        g.bz[i] += dzi;
      }
      if (dri != 0.0) {
        double* gw = &g.Wr[static_cast<std::size_t>(i) * I];
        for (int j = 0; j < I; ++j) {
          gw[j] += dri * u[j];
          du[j] += dri * p.Wr[static_cast<std::size_t>(i) * I + j];
        }
        double* gu = &g.Ur[static_cast<std::size_t>(i) * H];
        for (int j = 0; j < H; ++j) {
          gu[j] += dri * h_prev[j];
          dh_prev[j] += dri * p.Ur[static_cast<std::size_t>(i) * H + j];
        }
        g.br[i] += dri;
      }
    }
    dh = dh_prev;
  }
}

// ---- heads -----------------------------------------------------------------

inline double classify(const ClassHead& head, const std::vector<double>& h) {
  double a = head.b;
  for (std::size_t i = 0; i < head.w.size(); ++i) a += head.w[i] * h[i];
  return logistic(a);
}

inline double class_logit(const ClassHead& head, const std::vector<double>& h) {
  double a = head.b;
  for (std::size_t i = 0; i < head.w.size(); ++i) a += head.w[i] * h[i];
  return a;
}

struct RegCache {
  std::vector<double> act;  // rectified hidden activations
};

inline double regress(const RegHead& head, const std::vector<double>& h,
                      RegCache* cache = nullptr) {
  RegCache local;
  RegCache& c = cache ? *cache : local;
  c.act.assign(head.units, 0.0);
  double y = head.b2;
  for (int i = 0; i < head.units; ++i) {
    double a = head.b1[i];
    const double* w = &head.W1[static_cast<std::size_t>(i) * head.hidden];
    for (int j = 0; j < head.hidden; ++j) a += w[j] * h[j];
    c.act[i] = a > 0.0 ? a : 0.0;
    y += head.w2[i] * c.act[i];
  }
  return y;
}

// ---- baseline input builders ------------------------------------------------

enum class Baseline { none, mean, forward, simple };

inline std::string baseline_name(Baseline b) {
  switch (b) {
    case Baseline::none: return "none";
    case Baseline::mean: return "m";
    case Baseline::forward: return "f";
    case Baseline::simple: return "s";
  }
  return "?";
}

inline Baseline parse_baseline(const std::string& s) {
  if (s == "none") return Baseline::none;
  if (s == "m") return Baseline::mean;
  if (s == "f") return Baseline::forward;
  if (s == "s") return Baseline::simple;
  throw std::runtime_error("unknown baseline: " + s);
}

inline int baseline_input_size(Baseline b, int D) {
  return b == Baseline::simple ? 3 * D : D;
}

/// Dense step-major input sequence for the discretized GRU baselines:
/// mean-fill (M), forward-fill (F), or value/mask/interval triplets (S).
inline std::vector<double> baseline_inputs(const Sample& s, Baseline mode, int bins) {
  const int D = static_cast<int>(s.channels.size());
  const auto f = discretize_forward_fill(s, bins, mode != Baseline::forward);
  const int I = baseline_input_size(mode, D);
  std::vector<double> out(static_cast<std::size_t>(bins) * I, 0.0);
  for (int b = 0; b < bins; ++b)
    for (int d = 0; d < D; ++d) {
      out[static_cast<std::size_t>(b) * I + d] = f.values[d][b];
      if (mode == Baseline::simple) {
        out[static_cast<std::size_t>(b) * I + D + d] = f.mask[d][b];
        out[static_cast<std::size_t>(b) * I + 2 * D + d] = f.intervals[d][b];
      }
    }
  return out;
}

}  // namespace interpnet
