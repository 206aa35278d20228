#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "interpnet/data.hpp"

namespace interpnet {

// Guard for the cross-channel intensity denominator far from any data.
inline constexpr double kDenomEps = 1e-8;

/// Trainable interpolation parameters: per-channel log bandwidths (alpha_d =
/// exp(log_alpha_d)) and the unconstrained cross-channel matrix rho. kappa
/// is the fixed bandwidth multiplier of the non-smooth layer.
struct InterpParams {
  std::vector<double> log_alpha;  // D
  std::vector<double> rho;        // D*D, row-major
  double kappa = 10.0;

  int dim() const { return static_cast<int>(log_alpha.size()); }
  double alpha(int d) const { return std::exp(log_alpha[d]); }

  // Bandwidth initialized so the kernel half-width spans ~3 grid steps;
  // rho starts at the identity.
  static InterpParams init(int D, int T, double kappa = 10.0) {
    if (kappa <= 1.0) throw std::runtime_error("kappa must be > 1");
    InterpParams p;
    p.kappa = kappa;
    const double dr = 1.0 / (T - 1);
    const double alpha0 = 1.0 / (2.0 * (3.0 * dr) * (3.0 * dr));
    p.log_alpha.assign(D, std::log(alpha0));
    p.rho.assign(static_cast<std::size_t>(D) * D, 0.0);
    for (int d = 0; d < D; ++d) p.rho[static_cast<std::size_t>(d) * D + d] = 1.0;
    return p;
  }
};

/// Which interpolation outputs feed the prediction network: smooth
/// cross-channel (SI), transient (T), intensity (I).
struct ChannelSelection {
  bool smooth = true;
  bool transient = true;
  bool intensity = true;

  int count() const { return int(smooth) + int(transient) + int(intensity); }

  static ChannelSelection parse(const std::string& csv) {
    ChannelSelection s{false, false, false};
    std::size_t pos = 0;
    while (pos <= csv.size()) {
      std::size_t comma = csv.find(',', pos);
      if (comma == std::string::npos) comma = csv.size();
      std::string tok = csv.substr(pos, comma - pos);
      for (auto& c : tok) c = static_cast<char>(std::tolower(c));
      if (tok == "si") s.smooth = true;
      else if (tok == "t") s.transient = true;
      else if (tok == "i") s.intensity = true;
      else if (!tok.empty()) throw std::runtime_error("unknown channel token: " + tok);
      pos = comma + 1;
    }
    if (s.count() == 0) throw std::runtime_error("channel selection must be non-empty");
    return s;
  }

  std::string to_string() const {
    std::string out;
    auto add = [&out](const char* t) {
      if (!out.empty()) out += ",";
      out += t;
    };
    if (smooth) add("SI");
    if (transient) add("T");
    if (intensity) add("I");
    return out;
  }
};

inline double kernel_weight(double r, double t, double alpha) {
  return std::exp(-alpha * (r - t) * (r - t));
}

namespace detail {

/// One kernel-smoother evaluation at reference r over the visible
/// observations of a channel in the union representation. Stable softmax:
/// logits -alpha*(r-t)^2, max-subtracted. intensity = Z = exp(m) * sum p.
struct Smoother {
  double intensity = 0.0;  // Z, exact (may underflow to 0 for huge alpha)
  double mean = 0.0;       // weighted value average (convex combination)
  double d_mean = 0.0;     // d mean / d alpha
  double d_intensity = 0.0;
  bool any = false;
};

inline Smoother smooth_eval(double r, const std::vector<double>& times,
                            const std::vector<double>& values,
                            const std::vector<std::uint8_t>& vis, double alpha,
                            bool with_grad) {
  Smoother out;
  double m = -std::numeric_limits<double>::infinity();
  const std::size_t U = times.size();
  for (std::size_t u = 0; u < U; ++u) {
    if (!vis[u]) continue;
    const double dd = (r - times[u]) * (r - times[u]);
    m = std::max(m, -alpha * dd);
    out.any = true;
  }
  if (!out.any) return out;
  double zp = 0.0, num = 0.0, a_sum = 0.0, b_sum = 0.0;
  for (std::size_t u = 0; u < U; ++u) {
    if (!vis[u]) continue;
    const double dd = (r - times[u]) * (r - times[u]);
    const double p = std::exp(-alpha * dd - m);
    zp += p;
    num += p * values[u];
    if (with_grad) {
      a_sum += p * dd;
      b_sum += p * dd * values[u];
    }
  }
  out.mean = num / zp;
  out.intensity = std::exp(m) * zp;
  if (with_grad) {
    out.d_mean = -(b_sum - a_sum * out.mean) / zp;
    out.d_intensity = -std::exp(m) * a_sum;
  }
  return out;
}

}  // namespace detail

/// Union representation of one sample with hold-out masking applied: vis is
/// the observation mask with held-out points zeroed, so masked observations
/// contribute to nothing downstream.
struct VisibleGrid {
  UnionGrid ug;
  std::vector<std::vector<std::uint8_t>> vis;

  static VisibleGrid make(const Sample& s, const MaskAssignment* mask) {
    VisibleGrid g;
    g.ug = to_union_grid(s);
    g.vis = g.ug.mask;
    if (mask) {
      for (std::size_t d = 0; d < mask->held_out.size() && d < g.vis.size(); ++d)
        for (std::size_t j : mask->held_out[d]) g.vis[d][g.ug.obs_index[d][j]] = 0;
    }
    return g;
  }
};

// ---- scalar forms (per-channel, per-reference-point) -----------------------

inline double intensity_at(double r, const TimeChannel& ch, double alpha) {
  double z = 0.0;
  for (double t : ch.t) z += kernel_weight(r, t, alpha);
  return z;
}

inline double smooth_interp_at(double r, const TimeChannel& ch, double alpha) {
  if (ch.empty()) throw std::runtime_error("no support for interpolation");
  std::vector<std::uint8_t> vis(ch.size(), 1);
  return detail::smooth_eval(r, ch.t, ch.x, vis, alpha, false).mean;
}

inline double nonsmooth_interp_at(double r, const TimeChannel& ch, double alpha, double kappa) {
  return smooth_interp_at(r, ch, kappa * alpha);
}

/// Second-layer merge at one reference point: chi_d mixes all channels'
/// smooth interpolants weighted by intensity and rho; tau_d = gamma_d - chi_d.
inline std::pair<double, double> cross_channel(int d, const std::vector<double>& lam,
                                               const std::vector<double>& sig, double gamma_d,
                                               const std::vector<double>& rho) {
  const int D = static_cast<int>(lam.size());
  double s = kDenomEps, num = 0.0;
  for (int dp = 0; dp < D; ++dp) {
    s += lam[dp];
    num += rho[static_cast<std::size_t>(d) * D + dp] * lam[dp] * sig[dp];
  }
  const double chi = num / s;
  return {chi, gamma_d - chi};
}

// ---- full forward over the union grid --------------------------------------

struct InterpCache {
  int D = 0, T = 0;
  ReferenceGrid grid;
  VisibleGrid vg;
  // All T*D arrays indexed [k*D + d].
  std::vector<double> lam, sig, gam, chi, tau;
  std::vector<double> sum_lam;  // per k, without the epsilon
};

inline std::size_t stack_rows(int D, const ChannelSelection& sel) {
  return static_cast<std::size_t>(D) * sel.count();
}

/// Runs the two interpolation layers on the union-grid representation and
/// assembles the (D*C) x T stack, row-major, blocks ordered [chi | tau | lam]
/// filtered by the selection, channel-major within blocks.
inline std::vector<double> interp_forward(const InterpParams& params, const Sample& s,
                                          const ReferenceGrid& grid, const ChannelSelection& sel,
                                          const MaskAssignment* mask = nullptr,
                                          InterpCache* cache = nullptr) {
  const int D = params.dim();
  const int T = grid.size();
  if (static_cast<int>(s.channels.size()) != D)
    throw std::runtime_error("sample dimension does not match parameters");

  InterpCache local;
  InterpCache& c = cache ? *cache : local;
  c.D = D;
  c.T = T;
  c.grid = grid;
  c.vg = VisibleGrid::make(s, mask);
  c.lam.assign(static_cast<std::size_t>(T) * D, 0.0);
  c.sig = c.lam;
  c.gam = c.lam;
  c.chi = c.lam;
  c.tau = c.lam;
  c.sum_lam.assign(T, 0.0);

  for (int k = 0; k < T; ++k) {
    const double r = grid.points[k];
    for (int d = 0; d < D; ++d) {
      const double a = params.alpha(d);
      const auto lo = detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[d], c.vg.vis[d], a, false);
      if (!lo.any) throw std::runtime_error("no support for interpolation in channel " +
                                            std::to_string(d));
      const auto hi =
          detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[d], c.vg.vis[d], params.kappa * a, false);
      c.lam[static_cast<std::size_t>(k) * D + d] = lo.intensity;
      c.sig[static_cast<std::size_t>(k) * D + d] = lo.mean;
      c.gam[static_cast<std::size_t>(k) * D + d] = hi.mean;
      c.sum_lam[k] += lo.intensity;
    }
    for (int d = 0; d < D; ++d) {
      double num = 0.0;
      for (int dp = 0; dp < D; ++dp)
        num += params.rho[static_cast<std::size_t>(d) * D + dp] *
               c.lam[static_cast<std::size_t>(k) * D + dp] *
               c.sig[static_cast<std::size_t>(k) * D + dp];
      const double chi = num / (c.sum_lam[k] + kDenomEps);
      c.chi[static_cast<std::size_t>(k) * D + d] = chi;
      c.tau[static_cast<std::size_t>(k) * D + d] =
          c.gam[static_cast<std::size_t>(k) * D + d] - chi;
    }
  }

  std::vector<double> stack(stack_rows(D, sel) * T, 0.0);
  std::size_t block = 0;
  auto fill = [&](const std::vector<double>& src) {
    for (int d = 0; d < D; ++d)
      for (int k = 0; k < T; ++k)
        stack[(block * D + d) * T + k] = src[static_cast<std::size_t>(k) * D + d];
    ++block;
  };
  if (sel.smooth) fill(c.chi);
  if (sel.transient) fill(c.tau);
  if (sel.intensity) fill(c.lam);
  return stack;
}

/// Reverse pass of interp_forward: stack adjoints in, gradients for
/// log_alpha and rho out (accumulated).
inline void interp_backward(const InterpParams& params, const InterpCache& c,
                            const ChannelSelection& sel, const std::vector<double>& stack_adj,
                            std::vector<double>& g_log_alpha, std::vector<double>& g_rho) {
  const int D = c.D, T = c.T;
  std::vector<double> a_chi(static_cast<std::size_t>(T) * D, 0.0);
  std::vector<double> a_lam = a_chi, a_sig = a_chi, a_gam = a_chi;

  std::size_t block = 0;
  auto pull = [&](std::vector<double>& dst, double sign, std::size_t blk) {
    for (int d = 0; d < D; ++d)
      for (int k = 0; k < T; ++k)
        dst[static_cast<std::size_t>(k) * D + d] += sign * stack_adj[(blk * D + d) * T + k];
  };
  std::size_t chi_blk = static_cast<std::size_t>(-1), tau_blk = chi_blk, lam_blk = chi_blk;
  if (sel.smooth) chi_blk = block++;
  if (sel.transient) tau_blk = block++;
  if (sel.intensity) lam_blk = block++;
  if (chi_blk != static_cast<std::size_t>(-1)) pull(a_chi, 1.0, chi_blk);
  if (tau_blk != static_cast<std::size_t>(-1)) {
    pull(a_gam, 1.0, tau_blk);   // tau = gam - chi
    pull(a_chi, -1.0, tau_blk);
  }
  if (lam_blk != static_cast<std::size_t>(-1)) pull(a_lam, 1.0, lam_blk);

  // chi backward: adds adjoints on lam and sig, gradient on rho.
  for (int k = 0; k < T; ++k) {
    const double s = c.sum_lam[k] + kDenomEps;
    for (int d = 0; d < D; ++d) {
      const double a = a_chi[static_cast<std::size_t>(k) * D + d];
      if (a == 0.0) continue;
      const double chi = c.chi[static_cast<std::size_t>(k) * D + d];
      for (int dp = 0; dp < D; ++dp) {
        const double lam = c.lam[static_cast<std::size_t>(k) * D + dp];
        const double sig = c.sig[static_cast<std::size_t>(k) * D + dp];
        const double rho = params.rho[static_cast<std::size_t>(d) * D + dp];
        g_rho[static_cast<std::size_t>(d) * D + dp] += a * lam * sig / s;
        a_lam[static_cast<std::size_t>(k) * D + dp] += a * (rho * sig - chi) / s;
        a_sig[static_cast<std::size_t>(k) * D + dp] += a * rho * lam / s;
      }
    }
  }

  // First-layer backward: bandwidth gradients via recomputed smoother sums.
  for (int d = 0; d < D; ++d) {
    const double alpha = params.alpha(d);
    double g = 0.0;
    for (int k = 0; k < T; ++k) {
      const std::size_t kd = static_cast<std::size_t>(k) * D + d;
      const double al = a_lam[kd], as = a_sig[kd], ag = a_gam[kd];
      if (al == 0.0 && as == 0.0 && ag == 0.0) continue;
      const double r = c.grid.points[k];
      if (al != 0.0 || as != 0.0) {
        const auto lo =
            detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[d], c.vg.vis[d], alpha, true);
        g += al * lo.d_intensity + as * lo.d_mean;
      }
      if (ag != 0.0) {
        const auto hi = detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[d], c.vg.vis[d],
                                            params.kappa * alpha, true);
        g += ag * params.kappa * hi.d_mean;
      }
    }
    g_log_alpha[d] += alpha * g;
  }
}

// ---- reconstruction of held-out points -------------------------------------

struct ReconQuery {
  double t = 0.0;
  int d = 0;
  double x = 0.0;  // held-out true value
};

inline std::vector<ReconQuery> mask_queries(const Sample& s, const MaskAssignment& mask) {
  std::vector<ReconQuery> q;
  for (std::size_t d = 0; d < mask.held_out.size(); ++d)
    for (std::size_t j : mask.held_out[d])
      q.push_back({s.channels[d].t[j], static_cast<int>(d), s.channels[d].x[j]});
  return q;
}

struct ReconCache {
  VisibleGrid vg;
  std::vector<ReconQuery> queries;
  std::vector<std::vector<double>> lam, sig;  // per query, D each
  std::vector<double> chi;                    // per query
};

/// Evaluates the smooth cross-channel interpolant at the query times using
/// only the visible (un-masked) observations.
inline std::vector<double> reconstruct_at(const InterpParams& params, const Sample& s,
                                          const std::vector<ReconQuery>& queries,
                                          const MaskAssignment* mask = nullptr,
                                          ReconCache* cache = nullptr) {
  const int D = params.dim();
  ReconCache local;
  ReconCache& c = cache ? *cache : local;
  c.vg = VisibleGrid::make(s, mask);
  c.queries = queries;
  c.lam.assign(queries.size(), std::vector<double>(D, 0.0));
  c.sig = c.lam;
  c.chi.assign(queries.size(), 0.0);

  std::vector<double> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double r = queries[q].t;
    double sum = kDenomEps, num = 0.0;
    for (int dp = 0; dp < D; ++dp) {
      const auto lo = detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[dp], c.vg.vis[dp],
                                          params.alpha(dp), false);
      if (!lo.any)
        throw std::runtime_error("no support for interpolation in channel " + std::to_string(dp));
      c.lam[q][dp] = lo.intensity;
      c.sig[q][dp] = lo.mean;
      sum += lo.intensity;
      num += params.rho[static_cast<std::size_t>(queries[q].d) * D + dp] * lo.intensity * lo.mean;
    }
    c.chi[q] = num / sum;
    out[q] = c.chi[q];
  }
  return out;
}

inline void reconstruct_backward(const InterpParams& params, const ReconCache& c,
                                 const std::vector<double>& adjoints,
                                 std::vector<double>& g_log_alpha, std::vector<double>& g_rho) {
  const int D = params.dim();
  for (std::size_t q = 0; q < c.queries.size(); ++q) {
    const double a = adjoints[q];
    if (a == 0.0) continue;
    const int d = c.queries[q].d;
    const double r = c.queries[q].t;
    double sum = kDenomEps;
    for (int dp = 0; dp < D; ++dp) sum += c.lam[q][dp];
    for (int dp = 0; dp < D; ++dp) {
      const double rho = params.rho[static_cast<std::size_t>(d) * D + dp];
      const double a_lam = a * (rho * c.sig[q][dp] - c.chi[q]) / sum;
      const double a_sig = a * rho * c.lam[q][dp] / sum;
      g_rho[static_cast<std::size_t>(d) * D + dp] += a * c.lam[q][dp] * c.sig[q][dp] / sum;
      const double alpha = params.alpha(dp);
      const auto lo =
          detail::smooth_eval(r, c.vg.ug.times, c.vg.ug.values[dp], c.vg.vis[dp], alpha, true);
      g_log_alpha[dp] += alpha * (a_lam * lo.d_intensity + a_sig * lo.d_mean);
    }
  }
}

}  // namespace interpnet
