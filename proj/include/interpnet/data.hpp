#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "interpnet/rng.hpp"

namespace interpnet {

using json = nlohmann::json;

enum class Task { classification, regression };

inline std::string task_name(Task t) {
  return t == Task::classification ? "classification" : "regression";
}

inline Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw std::runtime_error("unknown task: " + s);
}

/// One channel of a sample: paired (time, value) lists with strictly
/// increasing times in [0,1] after loading.
struct TimeChannel {
  std::vector<double> t;
  std::vector<double> x;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
};

struct Sample {
  std::string id;
  std::vector<TimeChannel> channels;
  double y = 0.0;  // {0,1} for classification, log-days for regression
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> channel_names;
  Task task = Task::classification;
  double window_hours = 48.0;

  std::size_t dim() const { return channel_names.size(); }
  std::size_t size() const { return samples.size(); }
};

/// Per-channel moments over the training split. Channels that are never
/// observed, or constant, are flagged degenerate and get std 1.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> degenerate;
};

struct ReferenceGrid {
  std::vector<double> points;

  static ReferenceGrid uniform(int T) {
    if (T < 2) throw std::runtime_error("reference grid needs T >= 2");
    ReferenceGrid g;
    g.points.resize(T);
    for (int k = 0; k < T; ++k) g.points[k] = static_cast<double>(k) / (T - 1);
    return g;
  }
  int size() const { return static_cast<int>(points.size()); }
};

/// Union-of-timestamps representation of one sample. values[d][u] is zero
/// where mask[d][u] == 0; obs_index maps channel observation j to its union
/// column so the representation is lossless.
struct UnionGrid {
  std::vector<double> times;                        // U
  std::vector<std::vector<double>> values;          // D x U
  std::vector<std::vector<std::uint8_t>> mask;      // D x U
  std::vector<std::vector<std::size_t>> obs_index;  // D x L_d
};

struct MaskAssignment {
  std::vector<std::vector<std::size_t>> held_out;  // per channel, sorted
  double fraction = 0.0;
  std::uint64_t seed = 0;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& h : held_out) n += h.size();
    return n;
  }
};

/// Fixed-bin features for the discretized baselines: bin means, observation
/// mask, and time-since-last-observation intervals in bin-width units.
struct DiscretizedFeatures {
  std::vector<std::vector<double>> values;      // D x B
  std::vector<std::vector<std::uint8_t>> mask;  // D x B
  std::vector<std::vector<double>> intervals;   // D x B
};

inline void validate_sample(const Sample& s, std::size_t dim, const std::string& where) {
  if (s.channels.size() != dim)
    throw std::runtime_error("schema error" + where + ": expected " + std::to_string(dim) +
                             " channels, got " + std::to_string(s.channels.size()));
  bool any = false;
  for (const auto& ch : s.channels) {
    if (ch.t.size() != ch.x.size())
      throw std::runtime_error("schema error" + where + ": mismatched t/x lengths");
    for (std::size_t j = 0; j < ch.t.size(); ++j) {
      if (!std::isfinite(ch.t[j]) || !std::isfinite(ch.x[j]))
        throw std::runtime_error("schema error" + where + ": non-finite entry");
      if (ch.t[j] < 0.0 || ch.t[j] > 1.0)
        throw std::runtime_error("schema error" + where + ": time outside [0,1]");
      if (j > 0 && ch.t[j] <= ch.t[j - 1])
        throw std::runtime_error("schema error" + where + ": non-monotone times");
    }
    if (!ch.empty()) any = true;
  }
  if (!any) throw std::runtime_error("schema error" + where + ": all channels empty");
}

namespace detail {

inline std::vector<double> as_double_vec(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::runtime_error("schema error" + where + ": expected array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw std::runtime_error("schema error" + where + ": expected number");
    v.push_back(e.get<double>());
  }
  return v;
}

inline Sample parse_sample_line(const json& j, const Dataset& ds, std::size_t line_no) {
  const std::string where = " at line " + std::to_string(line_no);
  Sample s;
  if (!j.contains("id") || !j.at("id").is_string())
    throw std::runtime_error("schema error" + where + ": missing id");
  s.id = j.at("id").get<std::string>();
  if (ds.task == Task::classification) {
    if (!j.contains("label")) throw std::runtime_error("schema error" + where + ": missing label");
    const double y = j.at("label").get<double>();
    if (y != 0.0 && y != 1.0)
      throw std::runtime_error("schema error" + where + ": label must be 0 or 1");
    s.y = y;
  } else {
    if (!j.contains("target")) throw std::runtime_error("schema error" + where + ": missing target");
    const double days = j.at("target").get<double>();
    if (!(days > 0.0) || !std::isfinite(days))
      throw std::runtime_error("schema error" + where + ": target must be positive days");
    s.y = std::log(days);
  }
  if (!j.contains("channels") || !j.at("channels").is_array())
    throw std::runtime_error("schema error" + where + ": missing channels");
  const auto& jch = j.at("channels");
  if (jch.size() != ds.dim())
    throw std::runtime_error("schema error" + where + ": expected " + std::to_string(ds.dim()) +
                             " channels, got " + std::to_string(jch.size()));
  s.channels.resize(ds.dim());
  for (std::size_t d = 0; d < ds.dim(); ++d) {
    const auto& c = jch.at(d);
    if (!c.contains("name") || c.at("name").get<std::string>() != ds.channel_names[d])
      throw std::runtime_error("schema error" + where + ": channel " + std::to_string(d) +
                               " does not match header order");
    s.channels[d].t = as_double_vec(c.at("t"), where);
    s.channels[d].x = as_double_vec(c.at("x"), where);
    for (double& tv : s.channels[d].t) {
      if (tv < -1e-9 || tv > ds.window_hours * (1.0 + 1e-9))
        throw std::runtime_error("schema error" + where + ": time outside window");
      tv = std::clamp(tv / ds.window_hours, 0.0, 1.0);
    }
  }
  validate_sample(s, ds.dim(), where);
  return s;
}

}  // namespace detail

/// Reads a JSON-Lines dataset file (header line followed by one sample per
/// line). Times are rescaled from [0, window_hours] to [0,1]; regression
/// targets are converted from days to log-days. Values stay raw.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.contains("schema") || j.at("schema").get<int>() != 1)
        throw std::runtime_error("schema error at line " + std::to_string(line_no) +
                                 ": expected header with schema 1");
      ds.channel_names = j.at("channels").get<std::vector<std::string>>();
      ds.task = parse_task(j.at("task").get<std::string>());
      ds.window_hours = j.at("window_hours").get<double>();
      if (ds.channel_names.empty() || ds.window_hours <= 0.0)
        throw std::runtime_error("schema error at line " + std::to_string(line_no) +
                                 ": bad header");
      have_header = true;
      continue;
    }
    ds.samples.push_back(detail::parse_sample_line(j, ds, line_no));
  }
  if (!have_header) throw std::runtime_error("schema error: missing header line in " + path);
  if (ds.samples.empty()) throw std::runtime_error("empty dataset: " + path);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  json header = {{"schema", 1},
                 {"channels", ds.channel_names},
                 {"task", task_name(ds.task)},
                 {"window_hours", ds.window_hours}};
  out << header.dump() << "\n";
  for (const auto& s : ds.samples) {
    json jch = json::array();
    for (std::size_t d = 0; d < ds.dim(); ++d) {
      std::vector<double> hours = s.channels[d].t;
      for (double& tv : hours) tv *= ds.window_hours;
      jch.push_back({{"name", ds.channel_names[d]}, {"t", hours}, {"x", s.channels[d].x}});
    }
    json j;
    j["id"] = s.id;
    if (ds.task == Task::classification)
      j["label"] = static_cast<int>(s.y);
    else
      j["target"] = std::exp(s.y);
    j["channels"] = jch;
    out << j.dump() << "\n";
  }
}

/// Pooled per-channel mean/std over all observed values in the training
/// split. Population std; unobserved or constant channels are degenerate.
inline ChannelStats global_channel_stats(const Dataset& train) {
  if (train.samples.empty()) throw std::runtime_error("empty training split");
  const std::size_t D = train.dim();
  ChannelStats st;
  st.mean.assign(D, 0.0);
  st.stddev.assign(D, 1.0);
  st.degenerate.assign(D, false);
  for (std::size_t d = 0; d < D; ++d) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto& s : train.samples)
      for (double v : s.channels[d].x) {
        sum += v;
        sumsq += v * v;
        ++n;
      }
    if (n == 0) {
      st.degenerate[d] = true;
      continue;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    st.mean[d] = mean;
    if (var > 0.0) {
      st.stddev[d] = std::sqrt(var);
    } else {
      st.stddev[d] = 1.0;
      st.degenerate[d] = true;
    }
  }
  return st;
}

inline Sample zscore_sample(Sample s, const ChannelStats& st) {
  for (std::size_t d = 0; d < s.channels.size(); ++d)
    for (double& v : s.channels[d].x) v = (v - st.mean[d]) / st.stddev[d];
  return s;
}

/// Gives every empty channel a single observation (t=0, x=0); in z-scored
/// units zero is the channel's global mean. Non-empty channels unchanged.
inline Sample impute_empty_channels(Sample s) {
  for (auto& ch : s.channels) {
    if (ch.empty()) {
      ch.t.push_back(0.0);
      ch.x.push_back(0.0);
    }
  }
  return s;
}

/// Z-scores with training-split stats and fills empty channels; the standard
/// preprocessing applied to every split before interpolation.
inline Dataset prepare_dataset(Dataset ds, const ChannelStats& st) {
  for (auto& s : ds.samples) s = impute_empty_channels(zscore_sample(std::move(s), st));
  return ds;
}

inline UnionGrid to_union_grid(const Sample& s) {
  UnionGrid g;
  for (const auto& ch : s.channels)
    g.times.insert(g.times.end(), ch.t.begin(), ch.t.end());
  std::sort(g.times.begin(), g.times.end());
  g.times.erase(std::unique(g.times.begin(), g.times.end()), g.times.end());
  const std::size_t D = s.channels.size(), U = g.times.size();
  g.values.assign(D, std::vector<double>(U, 0.0));
  g.mask.assign(D, std::vector<std::uint8_t>(U, 0));
  g.obs_index.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    const auto& ch = s.channels[d];
    g.obs_index[d].resize(ch.size());
    for (std::size_t j = 0; j < ch.size(); ++j) {
      const auto it = std::lower_bound(g.times.begin(), g.times.end(), ch.t[j]);
      const std::size_t u = static_cast<std::size_t>(it - g.times.begin());
      g.obs_index[d][j] = u;
      g.values[d][u] = ch.x[j];
      g.mask[d][u] = 1;
    }
  }
  return g;
}

/// Inverse of to_union_grid; used to verify the representation is lossless.
inline std::vector<TimeChannel> channels_from_union(const UnionGrid& g) {
  std::vector<TimeChannel> out(g.values.size());
  for (std::size_t d = 0; d < g.values.size(); ++d)
    for (std::size_t u = 0; u < g.times.size(); ++u)
      if (g.mask[d][u]) {
        out[d].t.push_back(g.times[u]);
        out[d].x.push_back(g.values[d][u]);
      }
  return out;
}

/// Draws the per-channel hold-out sets for the reconstruction loss:
/// round(fraction * L_d) indices without replacement, capped at L_d - 1,
/// none for channels with fewer than two observations.
inline MaskAssignment sample_mask(const Sample& s, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::runtime_error("mask fraction must be in (0,1)");
  MaskAssignment m;
  m.fraction = fraction;
  m.seed = seed;
  m.held_out.resize(s.channels.size());
  for (std::size_t d = 0; d < s.channels.size(); ++d) {
    const std::size_t L = s.channels[d].size();
    if (L < 2) continue;
    std::size_t n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(L)));
    n = std::min(n, L - 1);
    if (n == 0) continue;
    std::vector<std::size_t> idx(L);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_rng(mix_seed(seed, d));
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, L - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    m.held_out[d] = std::move(idx);
  }
  return m;
}

struct FoldSplit {
  std::vector<std::size_t> train, val, test;
};

/// k-fold split with a validation subset carved out of the training folds.
/// Classification folds are stratified by label (per-fold positive counts
/// differ by at most one).
inline std::vector<FoldSplit> split_kfold(const Dataset& ds, int k, std::uint64_t seed,
                                          double val_fraction = 0.15) {
  const std::size_t N = ds.size();
  if (k < 2) throw std::runtime_error("k must be >= 2");
  if (static_cast<std::size_t>(k) > N) throw std::runtime_error("k exceeds dataset size");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::runtime_error("val fraction must be in (0,1)");

  // Deal shuffled strata round-robin into folds.
  std::vector<std::vector<std::size_t>> strata;
  if (ds.task == Task::classification) {
    strata.resize(2);
    for (std::size_t i = 0; i < N; ++i) strata[ds.samples[i].y > 0.5 ? 1 : 0].push_back(i);
  } else {
    strata.resize(1);
    strata[0].resize(N);
    std::iota(strata[0].begin(), strata[0].end(), std::size_t{0});
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (std::size_t g = 0; g < strata.size(); ++g) {
    auto rng = make_rng(mix_seed(seed, 0x5f01du, g));
    std::shuffle(strata[g].begin(), strata[g].end(), rng);
    for (std::size_t i : strata[g]) folds[next++ % k].push_back(i);
  }

  std::vector<FoldSplit> out(k);
  for (int f = 0; f < k; ++f) {
    FoldSplit& sp = out[f];
    sp.test = folds[f];
    std::sort(sp.test.begin(), sp.test.end());
    std::vector<std::size_t> rest;
    for (int g = 0; g < k; ++g)
      if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    // Stratified validation subset of the remaining folds.
    std::vector<std::vector<std::size_t>> rest_strata(ds.task == Task::classification ? 2 : 1);
    for (std::size_t i : rest) {
      const std::size_t g =
          (ds.task == Task::classification && ds.samples[i].y > 0.5) ? 1 : 0;
      rest_strata[g % rest_strata.size()].push_back(i);
    }
    for (std::size_t g = 0; g < rest_strata.size(); ++g) {
      auto& str = rest_strata[g];
      std::sort(str.begin(), str.end());
      auto rng = make_rng(mix_seed(seed, 0xa17u, f * 131 + g + 7));
      std::shuffle(str.begin(), str.end(), rng);
      std::size_t nv = static_cast<std::size_t>(std::llround(val_fraction * str.size()));
      if (str.size() > 1) nv = std::max<std::size_t>(nv, 1);
      nv = std::min(nv, str.empty() ? 0 : str.size() - 1);
      for (std::size_t i = 0; i < str.size(); ++i)
        (i < nv ? sp.val : sp.train).push_back(str[i]);
    }
    std::sort(sp.train.begin(), sp.train.end());
    std::sort(sp.val.begin(), sp.val.end());
  }
  return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.channel_names = ds.channel_names;
  out.task = ds.task;
  out.window_hours = ds.window_hours;
  out.samples.reserve(idx.size());
  for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
  return out;
}

/// Temporal discretization with forward filling. Bin b covers
/// [b/B, (b+1)/B); multiple observations average; empty bins carry the last
/// observed value forward (or zero, the z-scored global mean, when nothing
/// precedes). mean_fill substitutes zero in every empty bin instead.
/// Intervals follow delta_1 = 0; delta_b = 1 + delta_{b-1} if the previous
/// bin was empty, else 1.
inline DiscretizedFeatures discretize_forward_fill(const Sample& s, int bins,
                                                   bool mean_fill = false) {
  if (bins < 1) throw std::runtime_error("bins must be >= 1");
  const std::size_t D = s.channels.size();
  const std::size_t B = static_cast<std::size_t>(bins);
  DiscretizedFeatures f;
  f.values.assign(D, std::vector<double>(B, 0.0));
  f.mask.assign(D, std::vector<std::uint8_t>(B, 0));
  f.intervals.assign(D, std::vector<double>(B, 0.0));
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> sum(B, 0.0);
    std::vector<std::size_t> cnt(B, 0);
    for (std::size_t j = 0; j < s.channels[d].size(); ++j) {
      const std::size_t b =
          std::min(B - 1, static_cast<std::size_t>(s.channels[d].t[j] * bins));
      sum[b] += s.channels[d].x[j];
      ++cnt[b];
    }
    double last = 0.0;
    bool seen = false;
    for (std::size_t b = 0; b < B; ++b) {
      if (cnt[b] > 0) {
        f.values[d][b] = sum[b] / cnt[b];
        f.mask[d][b] = 1;
        last = f.values[d][b];
        seen = true;
      } else {
        f.values[d][b] = (mean_fill || !seen) ? 0.0 : last;
      }
      f.intervals[d][b] =
          b == 0 ? 0.0 : (f.mask[d][b - 1] ? 1.0 : 1.0 + f.intervals[d][b - 1]);
    }
  }
  return f;
}

}  // namespace interpnet
