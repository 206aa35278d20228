#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "interpnet/data.hpp"
#include "interpnet/rng.hpp"

namespace interpnet {

enum class SynthMode { intensity, transient, trend, subsample };

inline std::string synth_mode_name(SynthMode m) {
  switch (m) {
    case SynthMode::intensity: return "intensity";
    case SynthMode::transient: return "transient";
    case SynthMode::trend: return "trend";
    case SynthMode::subsample: return "subsample";
  }
  return "?";
}

inline SynthMode parse_synth_mode(const std::string& s) {
  if (s == "intensity") return SynthMode::intensity;
  if (s == "transient") return SynthMode::transient;
  if (s == "trend") return SynthMode::trend;
  if (s == "subsample") return SynthMode::subsample;
  throw std::runtime_error("unknown synth mode: " + s);
}

struct SynthConfig {
  SynthMode mode = SynthMode::intensity;
  Task task = Task::classification;
  int n_samples = 200;
  int n_channels = 3;
  double balance = 0.5;       // fraction of class-1 cases
  double rate0 = 30.0;        // per-channel Poisson rate for class 0
  double rate1 = 10.0;        // per-channel Poisson rate for class 1
  double noise = 0.1;         // observation noise std
  double bump_amplitude = 0.3;
  double bump_width = 0.05;   // std of the Gaussian bump
  double trend_scale = 1.5;   // slope range (regression) or magnitude (classification)
  double keep_fraction = 0.1; // subsample mode: fraction of dense points kept
  double window_hours = 48.0;

  void validate() const {
    if (n_samples < 1) throw std::runtime_error("invalid synth config: n_samples < 1");
    if (n_channels < 1) throw std::runtime_error("invalid synth config: D < 1");
    if (!(rate0 > 0.0) || !(rate1 > 0.0))
      throw std::runtime_error("invalid synth config: rates must be > 0");
    if (!(balance >= 0.0 && balance <= 1.0))
      throw std::runtime_error("invalid synth config: balance outside [0,1]");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
      throw std::runtime_error("invalid synth config: keep_fraction outside (0,1]");
    if (noise < 0.0) throw std::runtime_error("invalid synth config: negative noise");
    if (mode == SynthMode::trend && trend_scale <= 0.0)
      throw std::runtime_error("invalid synth config: trend_scale must be > 0");
  }

  static SynthConfig from_json(const json& j) {
    SynthConfig c;
    if (j.contains("mode")) c.mode = parse_synth_mode(j.at("mode").get<std::string>());
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("n")) c.n_samples = j.at("n").get<int>();
    if (j.contains("d")) c.n_channels = j.at("d").get<int>();
    if (j.contains("balance")) c.balance = j.at("balance").get<double>();
    if (j.contains("rate0")) c.rate0 = j.at("rate0").get<double>();
    if (j.contains("rate1")) c.rate1 = j.at("rate1").get<double>();
    if (j.contains("noise")) c.noise = j.at("noise").get<double>();
    if (j.contains("bump_amplitude")) c.bump_amplitude = j.at("bump_amplitude").get<double>();
    if (j.contains("bump_width")) c.bump_width = j.at("bump_width").get<double>();
    if (j.contains("trend_scale")) c.trend_scale = j.at("trend_scale").get<double>();
    if (j.contains("keep_fraction")) c.keep_fraction = j.at("keep_fraction").get<double>();
    if (j.contains("window_hours")) c.window_hours = j.at("window_hours").get<double>();
    return c;
  }

  json to_json() const {
    return {{"mode", synth_mode_name(mode)},
            {"task", task_name(task)},
            {"n", n_samples},
            {"d", n_channels},
            {"balance", balance},
            {"rate0", rate0},
            {"rate1", rate1},
            {"noise", noise},
            {"bump_amplitude", bump_amplitude},
            {"bump_width", bump_width},
            {"trend_scale", trend_scale},
            {"keep_fraction", keep_fraction},
            {"window_hours", window_hours}};
  }
};

namespace detail {

inline std::vector<double> poisson_times(double rate, std::mt19937_64& rng) {
  std::poisson_distribution<int> np(rate);
  const int n = np(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back(u(rng));
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end(),
                      [](double a, double b) { return b - a < 1e-12; }),
          t.end());
  return t;
}

struct SmoothSignal {
  double amp, freq, phase, offset;
  double operator()(double t) const {
    return offset + amp * std::sin(2.0 * std::numbers::pi * (freq * t + phase));
  }
};

inline SmoothSignal random_signal(std::mt19937_64& rng, double f_lo = 0.5, double f_hi = 2.0,
                                  double a_lo = 0.5, double a_hi = 1.5) {
  std::uniform_real_distribution<double> ua(a_lo, a_hi), uf(f_lo, f_hi), up(0.0, 1.0);
  std::normal_distribution<double> no(0.0, 0.3);
  return SmoothSignal{ua(rng), uf(rng), up(rng), no(rng)};
}

}  // namespace detail

/// Builds a desk-scale synthetic dataset. The four modes differ in where
/// the label signal lives: intensity (observation rates only), transient
/// (a short bump in one channel for class 1), trend (sign or value of a
/// slow drift), subsample (dense class templates randomly thinned).
inline Dataset synthesize(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset ds;
  ds.task = (cfg.mode == SynthMode::trend) ? cfg.task : Task::classification;
  ds.window_hours = cfg.window_hours;
  for (int d = 0; d < cfg.n_channels; ++d) ds.channel_names.push_back("ch" + std::to_string(d));

  for (int n = 0; n < cfg.n_samples; ++n) {
    auto rng = make_rng(mix_seed(seed, static_cast<std::uint64_t>(n) + 1));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Sample s;
    s.id = "syn" + std::to_string(n);

    int label = u01(rng) < cfg.balance ? 1 : 0;
    double slope = 0.0;
    if (cfg.mode == SynthMode::trend) {
      if (ds.task == Task::regression) {
        slope = cfg.trend_scale * (2.0 * u01(rng) - 1.0);
        s.y = slope;
      } else {
        slope = label ? cfg.trend_scale : -cfg.trend_scale;
        s.y = label;
      }
    } else {
      s.y = label;
    }

    const double rate = label ? cfg.rate1 : cfg.rate0;
    std::vector<double> shared_times;
    if (cfg.mode == SynthMode::intensity) {
      // All channels of a sample observe on one shared grid. With identical
      // per-channel densities the cross-channel mixture weights are constant,
      // so interpolated values carry no trace of the sampling rate and only
      // the intensity features encode the label.
      shared_times = detail::poisson_times(rate, rng);
    }
    int bump_channel = -1;
    double bump_center = 0.0;
    if (cfg.mode == SynthMode::transient && label == 1) {
      // Bump lives in the first channel at a random time; the random
      // location is what makes the task transient rather than a level shift.
      std::uniform_real_distribution<double> ucenter(0.15, 0.85);
      bump_channel = 0;
      bump_center = ucenter(rng);
    }

    s.channels.resize(cfg.n_channels);
    for (int d = 0; d < cfg.n_channels; ++d) {
      auto& ch = s.channels[d];
      std::vector<double> times;
      // Keep intensity-mode signals slow enough that even the sparse class
      // reconstructs them faithfully: the values then carry no class signal.
      // Transient-mode backgrounds are gentle so the bump is the dominant
      // short-timescale structure.
      detail::SmoothSignal sig =
          cfg.mode == SynthMode::intensity
              ? detail::random_signal(rng, 0.2, 0.6)
              : cfg.mode == SynthMode::transient
                    ? detail::random_signal(rng, 0.3, 0.8, 0.25, 0.75)
                    : detail::random_signal(rng);
      if (cfg.mode == SynthMode::subsample) {
        // Dense class template thinned to keep_fraction.
        const int dense = 200;
        for (int i = 0; i < dense; ++i) {
          const double t = (i + 0.5) / dense;
          if (u01(rng) < cfg.keep_fraction) times.push_back(t);
        }
      } else if (cfg.mode == SynthMode::intensity) {
        times = shared_times;
      } else {
        times = detail::poisson_times(cfg.rate0, rng);
      }
      for (double t : times) {
        double v;
        switch (cfg.mode) {
          case SynthMode::intensity:
            v = sig(t);
            break;
          case SynthMode::transient:
            v = sig(t);
            if (d == bump_channel) {
              const double z = (t - bump_center) / cfg.bump_width;
              v += cfg.bump_amplitude * std::exp(-0.5 * z * z);
            }
            break;
          case SynthMode::trend:
            v = slope * (t - 0.5) + sig.offset;
            break;
          case SynthMode::subsample:
          default:
            v = label ? std::sin(4.0 * std::numbers::pi * t)
                      : std::sin(2.0 * std::numbers::pi * t);
            break;
        }
        ch.t.push_back(t);
        ch.x.push_back(v + cfg.noise * gauss(rng));
      }
    }
    bool any = false;
    for (const auto& ch : s.channels) any |= !ch.empty();
    if (!any) {
      s.channels[0].t.push_back(0.5);
      s.channels[0].x.push_back(cfg.noise * gauss(rng));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace interpnet
