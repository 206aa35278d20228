#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "interpnet/metrics.hpp"
#include "interpnet/synth.hpp"

using namespace interpnet;

TEST_CASE("ranking AUC by pair counting") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0.0, 0.0, 1.0, 1.0}) == doctest::Approx(0.75));
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0.0, 0.0, 1.0, 1.0}) == 1.0);
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0.0, 0.0, 1.0, 1.0}) == 0.0);
  // all-equal scores: every pair ties, half credit
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0.0, 1.0, 0.0, 1.0}) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {1.0, 1.0}), doctest::Contains("single-class"),
                       std::runtime_error);
}

TEST_CASE("AUC of random scores approaches one half") {
  auto rng = make_rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores, labels;
  for (int i = 0; i < 4000; ++i) {
    scores.push_back(u(rng));
    labels.push_back(u(rng) < 0.3 ? 1.0 : 0.0);
  }
  CHECK(roc_auc(scores, labels) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("average precision step sum") {
  CHECK(auprc({0.9, 0.1}, {0.0, 1.0}) == doctest::Approx(0.5));
  CHECK(auprc({0.1, 0.9}, {0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(auprc({0.1, 0.2, 0.8, 0.9}, {0.0, 0.0, 1.0, 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(auprc({0.1, 0.2}, {0.0, 0.0}), doctest::Contains("no positives"),
                       std::runtime_error);
  // reversed perfect ranking is the minimum for this instance
  const double rev = auprc({0.9, 0.8, 0.2, 0.1}, {0.0, 0.0, 1.0, 1.0});
  const double fwd = auprc({0.1, 0.2, 0.8, 0.9}, {0.0, 0.0, 1.0, 1.0});
  CHECK(rev < fwd);
  CHECK(rev == doctest::Approx(1.0 / 6.0 + 0.25));  // positives at ranks 3 and 4
}

TEST_CASE("average precision of a random ranker is near the prevalence") {
  auto rng = make_rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores, labels;
  for (int i = 0; i < 4000; ++i) {
    scores.push_back(u(rng));
    labels.push_back(u(rng) < 0.3 ? 1.0 : 0.0);
  }
  CHECK(auprc(scores, labels) == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("mean cross entropy") {
  CHECK(mean_cross_entropy({0.5, 0.5, 0.5}, {0.0, 1.0, 1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // perfectly confident and correct: clipped, near zero, finite
  const double ce = mean_cross_entropy({1.0, 0.0}, {1.0, 0.0});
  CHECK(ce < 1e-10);
  CHECK(std::isfinite(ce));
  CHECK(std::isfinite(mean_cross_entropy({1.0, 0.0}, {0.0, 1.0})));  // confidently wrong
  // permutation invariant
  CHECK(mean_cross_entropy({0.2, 0.7, 0.9}, {0.0, 1.0, 1.0}) ==
        doctest::Approx(mean_cross_entropy({0.9, 0.2, 0.7}, {1.0, 0.0, 1.0})).epsilon(1e-14));
}

TEST_CASE("median absolute error works in day space") {
  // day-space errors [0.5, 0.5, 0, 1] -> median 0.5
  std::vector<double> pred, truth;
  const std::vector<double> pred_days = {2.5, 1.5, 2.0, 8.0};
  const std::vector<double> true_days = {3.0, 2.0, 2.0, 7.0};
  for (std::size_t i = 0; i < pred_days.size(); ++i) {
    pred.push_back(std::log(pred_days[i]));
    truth.push_back(std::log(true_days[i]));
  }
  CHECK(median_abs_error_days(pred, truth) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(median_abs_error_days(truth, truth) == 0.0);
  // odd count takes the middle residual
  CHECK(median_abs_error_days({std::log(2.0), std::log(4.0), std::log(9.0)},
                              {std::log(1.0), std::log(4.0), std::log(6.0)}) ==
        doctest::Approx(1.0));
}

TEST_CASE("explained variance uses population variances") {
  const std::vector<double> truth = {3.0, -0.5, 2.0, 7.0};
  const std::vector<double> pred = {2.5, 0.0, 2.0, 8.0};
  CHECK(explained_variance(pred, truth) == doctest::Approx(0.9572).epsilon(1e-4));
  CHECK(explained_variance(truth, truth) == 1.0);
  CHECK_THROWS_WITH_AS(explained_variance({1.0, 2.0}, {3.0, 3.0}), doctest::Contains("constant"),
                       std::runtime_error);
}

TEST_CASE("report aggregation computes means and population spread") {
  MetricReport r;
  r.folds = {{{"auc", 0.8}}, {{"auc", 0.9}}};
  r.finalize();
  CHECK(r.mean["auc"] == doctest::Approx(0.85));
  CHECK(r.stddev["auc"] == doctest::Approx(0.05));
  const json j = r.to_json();
  CHECK(j.at("folds").size() == 2);
  CHECK(j.contains("mean"));
  CHECK(j.contains("std"));
  CHECK(j.contains("config_fingerprint"));
  CHECK(j.at("task") == "classification");
}

TEST_CASE("config fingerprints separate different configurations") {
  ModelConfig mc;
  TrainConfig tc;
  const auto a = config_fingerprint(mc, tc, 1);
  const auto b = config_fingerprint(mc, tc, 1);
  const auto c = config_fingerprint(mc, tc, 2);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 16);
  ModelConfig mc2 = mc;
  mc2.hidden = 32;
  CHECK(config_fingerprint(mc2, tc, 1) != a);
}

TEST_CASE("cross-validated evaluation emits one row per fold, deterministically") {
  SynthConfig cfg;
  cfg.mode = SynthMode::intensity;
  cfg.n_samples = 40;
  const Dataset ds = synthesize(cfg, 21);
  ModelConfig mc;
  mc.task = ds.task;
  mc.channels = static_cast<int>(ds.dim());
  mc.refs = 6;
  mc.hidden = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 16;
  tc.seed = 1;

  const auto a = kfold_evaluate(ds, mc, tc, 3, 9);
  REQUIRE(a.folds.size() == 3);
  for (const auto& f : a.folds) {
    CHECK(f.count("auc") == 1);
    CHECK(f.count("auprc") == 1);
    CHECK(f.count("loss") == 1);
  }
  const auto b = kfold_evaluate(ds, mc, tc, 3, 9);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("regression evaluation reports day-space and variance metrics") {
  SynthConfig cfg;
  cfg.mode = SynthMode::trend;
  cfg.task = Task::regression;
  cfg.n_samples = 30;
  const Dataset ds = synthesize(cfg, 22);
  ModelConfig mc;
  mc.task = ds.task;
  mc.channels = static_cast<int>(ds.dim());
  mc.refs = 6;
  mc.hidden = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 16;
  const auto rep = kfold_evaluate(ds, mc, tc, 2, 5);
  REQUIRE(rep.folds.size() == 2);
  for (const auto& f : rep.folds) {
    CHECK(f.count("medae_days") == 1);
    CHECK(f.count("ev") == 1);
    CHECK(f.count("auc") == 0);
  }
}

TEST_CASE("ablation rows follow the canonical subset order") {
  const auto sels = ablation_selections();
  REQUIRE(sels.size() == 7);
  std::vector<std::string> labels;
  for (const auto& s : sels) labels.push_back(ablation_label(s));
  CHECK(labels == std::vector<std::string>{"SI,T,I", "SI,I", "SI,T", "SI", "I", "I,T", "T"});
}
