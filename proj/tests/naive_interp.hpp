#pragma once

// Independent scalar re-implementation of the interpolation layers, used as
// an oracle against the vectorized union-grid code. Deliberately written as
// plain double loops over per-channel (t, x) lists with no shared code, no
// softmax stabilization, and no union representation.

#include <cmath>
#include <vector>

#include "interpnet/interp.hpp"

namespace naive {

struct Outputs {
  // [k][d]
  std::vector<std::vector<double>> lam, sig, gam, chi, tau;
};

// held_out[d] lists observation indices of channel d to skip entirely.
inline Outputs forward(const interpnet::InterpParams& params, const interpnet::Sample& s,
                       const std::vector<double>& refs,
                       const std::vector<std::vector<std::size_t>>* held_out = nullptr) {
  const int D = params.dim();
  const int T = static_cast<int>(refs.size());
  auto skipped = [&](int d, std::size_t j) {
    if (!held_out) return false;
    for (std::size_t h : (*held_out)[d])
      if (h == j) return true;
    return false;
  };

  Outputs o;
  o.lam.assign(T, std::vector<double>(D, 0.0));
  o.sig = o.lam;
  o.gam = o.lam;
  o.chi = o.lam;
  o.tau = o.lam;

  for (int k = 0; k < T; ++k) {
    const double r = refs[k];
    for (int d = 0; d < D; ++d) {
      const double a = std::exp(params.log_alpha[d]);
      double z = 0.0, num = 0.0, zh = 0.0, numh = 0.0;
      for (std::size_t j = 0; j < s.channels[d].t.size(); ++j) {
        if (skipped(d, j)) continue;
        const double t = s.channels[d].t[j];
        const double x = s.channels[d].x[j];
        const double w = std::exp(-a * (r - t) * (r - t));
        const double wh = std::exp(-params.kappa * a * (r - t) * (r - t));
        z += w;
        num += w * x;
        zh += wh;
        numh += wh * x;
      }
      o.lam[k][d] = z;
      o.sig[k][d] = num / z;
      o.gam[k][d] = numh / zh;
    }
    double lam_sum = 0.0;
    for (int d = 0; d < D; ++d) lam_sum += o.lam[k][d];
    for (int d = 0; d < D; ++d) {
      double num = 0.0;
      for (int dp = 0; dp < D; ++dp)
        num += params.rho[static_cast<std::size_t>(d) * D + dp] * o.lam[k][dp] * o.sig[k][dp];
      o.chi[k][d] = num / (lam_sum + 1e-8);
      o.tau[k][d] = o.gam[k][d] - o.chi[k][d];
    }
  }
  return o;
}

}  // namespace naive
