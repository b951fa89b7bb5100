#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "eval/metrics.hpp"
#include "support/oracles.hpp"

using namespace gdce;
using namespace gdce::eval;

TEST_CASE("confusion matrix examples") {
  const std::vector<int> preds{0, 0, 1, 2, 2, 2};
  const std::vector<int> labels{0, 1, 1, 2, 2, 0};
  const auto cm = confusion_matrix(preds, labels, 3);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 2) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(2, 2) == 2);
  CHECK(cm.total() == 6);
  CHECK(cm.row_total(1) == 2);

  const std::vector<int> p3{0, 1, 2};
  const std::vector<int> l3{0, 0, 0};
  const auto third = confusion_matrix(p3, l3, 3).row_percentages();
  CHECK(third[0][0] + third[0][1] + third[0][2] == 100);
  CHECK(third[1] == std::vector<int>{0, 0, 0});

  CHECK_THROWS_AS(confusion_matrix(std::vector<int>{3}, std::vector<int>{0}, 3), DataError);
  CHECK_THROWS_AS(confusion_matrix(std::vector<int>{0, 1}, std::vector<int>{0}, 3), DataError);
}

TEST_CASE("row percentages always sum to 100") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<int> p(n), l(n);
    for (int i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(k));
      l[i] = static_cast<int>(rng.below(k));
    }
    const auto cm = confusion_matrix(p, l, k);
    const auto pct = cm.row_percentages();
    for (int r = 0; r < k; ++r) {
      int s = 0;
      for (int v : pct[r]) s += v;
      REQUIRE(s == (cm.row_total(r) > 0 ? 100 : 0));
    }
  }
}

TEST_CASE("auc examples") {
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
  const bool pos[] = {false, false, true, true};
  CHECK(*binary_auc(perfect, pos) == 1.0);
  const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
  CHECK(*binary_auc(tied, pos) == 0.5);
  const bool none[] = {false, false, false, false};
  CHECK_FALSE(binary_auc(tied, none).has_value());
  const std::vector<double> inverted{0.9, 0.8, 0.2, 0.1};
  CHECK(*binary_auc(inverted, pos) == 0.0);
}

TEST_CASE("auc equals exhaustive pair counting") {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const int n = 2 + static_cast<int>(rng.below(7));
    std::vector<double> s(n);
    std::vector<int> pos(n);
    std::unique_ptr<bool[]> posb(new bool[n]);
    for (int i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 4.0) / 4.0;  // coarse grid forces ties
      pos[i] = rng.uniform() < 0.5;
      posb[i] = pos[i] != 0;
    }
    const auto want = oracle::pairwise_auc(s, pos);
    const auto got = binary_auc(s, std::span<const bool>(posb.get(), n));
    REQUIRE(want.has_value() == got.has_value());
    if (want) REQUIRE(std::abs(*want - *got) < 1e-12);
  }
}

TEST_CASE("auc is invariant under monotone transforms and flips with labels") {
  Rng rng(5);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    const double p = rng.uniform();
    probs.push_back(1.0 - p);
    probs.push_back(p);
    labels.push_back(rng.uniform() < p ? 1 : 0);
  }
  const double a = roc_auc(probs, labels, 2).value;
  std::vector<double> warped(probs);
  for (auto& v : warped) v = std::pow(v, 3.0) * 7.0 + 1.0;
  CHECK(roc_auc(warped, labels, 2).value == doctest::Approx(a).epsilon(1e-12));
  std::vector<int> swapped(labels);
  for (auto& l : swapped) l = 1 - l;
  CHECK(roc_auc(probs, swapped, 2).value == doctest::Approx(1.0 - a).epsilon(1e-12));
}

TEST_CASE("macro auc skips absent classes") {
  const std::vector<double> probs{0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.6, 0.3, 0.1};
  const std::vector<int> labels{0, 1, 0};
  const auto r = roc_auc(probs, labels, 3);
  CHECK(r.scheme == "macro-ovr");
  CHECK(r.skipped_classes == std::vector<int>{2});
  CHECK_FALSE(r.per_class[2].has_value());
  CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("precision and recall") {
  const std::vector<int> preds{1, 1, 0, 0, 1};
  const std::vector<int> labels{1, 0, 1, 0, 1};
  const auto pr = precision_recall(preds, labels, 1);
  CHECK(pr.precision == doctest::Approx(2.0 / 3.0));
  CHECK(pr.recall == doctest::Approx(2.0 / 3.0));
  const auto none = precision_recall(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 1);
  CHECK(none.precision_undefined);
  CHECK(none.recall_undefined);

  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng.below(30));
    std::vector<int> p(n), l(n);
    for (int i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(3));
      l[i] = static_cast<int>(rng.below(3));
    }
    const int c = static_cast<int>(rng.below(3));
    const auto counts = oracle::count_outcomes(p, l, c);
    const auto a = precision_recall(p, l, c);
    const auto b = precision_recall(confusion_matrix(p, l, 3), c);
    REQUIRE(a.precision_undefined == (counts.tp + counts.fp == 0));
    REQUIRE(a.recall_undefined == (counts.tp + counts.fn == 0));
    if (!a.precision_undefined) REQUIRE(a.precision == doctest::Approx(double(counts.tp) / (counts.tp + counts.fp)));
    if (!a.recall_undefined) REQUIRE(a.recall == doctest::Approx(double(counts.tp) / (counts.tp + counts.fn)));
    REQUIRE(a.precision == b.precision);
    REQUIRE(a.recall == b.recall);
  }
}

TEST_CASE("worst group and full report") {
  const std::vector<GroupAccuracy> g{{0.9, 10}, {0.2, 0}, {0.6, 5}};
  CHECK(worst_group(g) == 0.6);

  const std::vector<double> probs{0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.6, 0.4};
  const std::vector<int> labels{0, 0, 1, 1};
  const auto r = evaluate(probs, labels, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(*r.per_class_accuracy[0] == 1.0);
  CHECK(*r.per_class_accuracy[1] == 0.5);
  CHECK(r.worst_group_accuracy == 0.5);
  const auto j = r.to_json({"neg", "pos"});
  CHECK(j.dump().find("pos") != std::string::npos);
  CHECK(!r.table({"neg", "pos"}).empty());
}

TEST_CASE("mean of reports") {
  const std::vector<double> p1{0.9, 0.1, 0.2, 0.8};
  const std::vector<double> p2{0.1, 0.9, 0.2, 0.8};
  const std::vector<int> l{0, 1};
  const auto m = mean_report({evaluate(p1, l, 2), evaluate(p2, l, 2)});
  CHECK(m.at("accuracy").get<double>() == doctest::Approx(0.75));
}
