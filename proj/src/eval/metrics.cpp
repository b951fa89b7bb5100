#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace gdce::eval {

using nlohmann::json;

long ConfusionMatrix::row_total(int truth) const {
  long s = 0;
  for (int p = 0; p < classes; ++p) s += at(truth, p);
  return s;
}

long ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

std::vector<std::vector<int>> ConfusionMatrix::row_percentages() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(classes),
                                    std::vector<int>(static_cast<std::size_t>(classes), 0));
  for (int t = 0; t < classes; ++t) {
    const long n = row_total(t);
    if (n == 0) continue;
    auto& row = out[static_cast<std::size_t>(t)];
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int p = 0; p < classes; ++p) {
      const double exact = 100.0 * static_cast<double>(at(t, p)) / static_cast<double>(n);
      const int floor_v = static_cast<int>(std::floor(exact));
      row[static_cast<std::size_t>(p)] = floor_v;
      assigned += floor_v;
      remainders.emplace_back(exact - floor_v, p);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < 100 - assigned; ++k) ++row[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k)].second)];
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int classes) {
  if (preds.size() != labels.size()) throw DataError("prediction and label counts differ");
  if (classes < 1) throw DataError("confusion matrix needs at least one class");
  ConfusionMatrix cm{classes, std::vector<long>(static_cast<std::size_t>(classes * classes), 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes || preds[i] < 0 || preds[i] >= classes) {
      throw DataError("class index out of range in confusion matrix");
    }
    ++cm.counts[static_cast<std::size_t>(labels[i] * classes + preds[i])];
  }
  return cm;
}

int argmax(std::span<const double> scores) {
  if (scores.empty()) throw DataError("argmax of empty scores");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::optional<double> binary_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw DataError("score and label counts differ");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks, 1-based.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      rank_sum += rank[i];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

AucResult roc_auc(std::span<const double> probs, std::span<const int> labels, int classes) {
  if (classes < 2) throw DataError("ROC-AUC needs at least two classes");
  if (probs.size() != labels.size() * static_cast<std::size_t>(classes)) {
    throw DataError("score matrix does not match label count");
  }
  const std::size_t n = labels.size();
  AucResult out;
  out.per_class.assign(static_cast<std::size_t>(classes), std::nullopt);
  std::vector<double> col(n);
  std::unique_ptr<bool[]> positive(new bool[n]);
  for (int k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = probs[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(k)];
      positive[i] = labels[i] == k;
    }
    out.per_class[static_cast<std::size_t>(k)] = binary_auc(col, std::span<const bool>(positive.get(), n));
  }
  if (classes == 2) {
    out.scheme = "binary";
    if (!out.per_class[1]) throw DataError("ROC-AUC undefined: a class is absent from the labels");
    out.value = *out.per_class[1];
    return out;
  }
  out.scheme = "macro-ovr";
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < classes; ++k) {
    if (out.per_class[static_cast<std::size_t>(k)]) {
      sum += *out.per_class[static_cast<std::size_t>(k)];
      ++present;
    } else {
      out.skipped_classes.push_back(k);
    }
  }
  if (present == 0) throw DataError("ROC-AUC undefined: no class has both positives and negatives");
  out.value = sum / present;
  return out;
}

PrecisionRecall precision_recall(std::span<const int> preds, std::span<const int> labels, int positive_class) {
  if (preds.size() != labels.size()) throw DataError("prediction and label counts differ");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool t = labels[i] == positive_class;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  PrecisionRecall pr;
  if (tp + fp == 0) {
    pr.precision_undefined = true;
  } else {
    pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    pr.recall_undefined = true;
  } else {
    pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  return pr;
}

PrecisionRecall precision_recall(const ConfusionMatrix& cm, int positive_class) {
  if (positive_class < 0 || positive_class >= cm.classes) throw DataError("positive class out of range");
  const long tp = cm.at(positive_class, positive_class);
  long col = 0;
  for (int t = 0; t < cm.classes; ++t) col += cm.at(t, positive_class);
  const long row = cm.row_total(positive_class);
  PrecisionRecall pr;
  if (col == 0) {
    pr.precision_undefined = true;
  } else {
    pr.precision = static_cast<double>(tp) / static_cast<double>(col);
  }
  if (row == 0) {
    pr.recall_undefined = true;
  } else {
    pr.recall = static_cast<double>(tp) / static_cast<double>(row);
  }
  return pr;
}

double worst_group(std::span<const GroupAccuracy> groups) {
  std::optional<double> worst;
  for (const auto& g : groups) {
    if (g.count < 1) continue;
    worst = worst ? std::min(*worst, g.accuracy) : g.accuracy;
  }
  if (!worst) throw DataError("worst-group accuracy undefined: every group is empty");
  return *worst;
}

MetricsReport evaluate(std::span<const double> probs, std::span<const int> labels, int classes) {
  if (labels.empty()) throw DataError("cannot evaluate an empty sample set");
  if (probs.size() != labels.size() * static_cast<std::size_t>(classes)) {
    throw DataError("score matrix does not match label count");
  }
  MetricsReport r;
  r.classes = classes;
  r.n_samples = static_cast<long>(labels.size());
  std::vector<int> preds(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    preds[i] = argmax(probs.subspan(i * static_cast<std::size_t>(classes), static_cast<std::size_t>(classes)));
  }
  r.confusion = confusion_matrix(preds, labels, classes);
  std::vector<GroupAccuracy> groups;
  long correct = 0;
  for (int k = 0; k < classes; ++k) {
    const long n = r.confusion.row_total(k);
    const long hit = r.confusion.at(k, k);
    correct += hit;
    r.class_counts.push_back(n);
    if (n > 0) {
      const double acc = static_cast<double>(hit) / static_cast<double>(n);
      r.per_class_accuracy.emplace_back(acc);
      groups.push_back({acc, n});
    } else {
      r.per_class_accuracy.emplace_back(std::nullopt);
    }
    r.per_class_pr.push_back(precision_recall(r.confusion, k));
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
  r.worst_group_accuracy = worst_group(groups);
  // A single-class evaluation set has no ROC curve; report NaN-free zeros
  // with every class skipped.
  try {
    r.roc_auc = roc_auc(probs, labels, classes);
  } catch (const DataError&) {
    r.roc_auc = AucResult{};
    r.roc_auc.scheme = "undefined";
    r.roc_auc.per_class.assign(static_cast<std::size_t>(classes), std::nullopt);
    for (int k = 0; k < classes; ++k) r.roc_auc.skipped_classes.push_back(k);
  }
  return r;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string class_name(const std::vector<std::string>& names, int k) {
  return static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)] : std::to_string(k);
}

}  // namespace

json MetricsReport::to_json(const std::vector<std::string>& class_names) const {
  json j;
  j["classes"] = classes;
  j["class_names"] = json::array();
  for (int k = 0; k < classes; ++k) j["class_names"].push_back(class_name(class_names, k));
  j["n_samples"] = n_samples;
  j["accuracy"] = accuracy;
  j["worst_group_accuracy"] = worst_group_accuracy;
  j["confusion"] = json::array();
  for (int t = 0; t < classes; ++t) {
    json row = json::array();
    for (int p = 0; p < classes; ++p) row.push_back(confusion.at(t, p));
    j["confusion"].push_back(row);
  }
  j["confusion_percent"] = confusion.row_percentages();
  j["class_counts"] = class_counts;
  j["per_class_accuracy"] = json::array();
  j["absent_groups"] = json::array();
  for (int k = 0; k < classes; ++k) {
    j["per_class_accuracy"].push_back(opt_json(per_class_accuracy[static_cast<std::size_t>(k)]));
    if (!per_class_accuracy[static_cast<std::size_t>(k)]) j["absent_groups"].push_back(class_name(class_names, k));
  }
  j["roc_auc"] = {{"value", roc_auc.value}, {"scheme", roc_auc.scheme}, {"skipped_classes", roc_auc.skipped_classes}};
  j["roc_auc"]["per_class"] = json::array();
  for (const auto& v : roc_auc.per_class) j["roc_auc"]["per_class"].push_back(opt_json(v));
  j["precision"] = json::array();
  j["recall"] = json::array();
  for (const auto& pr : per_class_pr) {
    j["precision"].push_back(pr.precision_undefined ? json(nullptr) : json(pr.precision));
    j["recall"].push_back(pr.recall_undefined ? json(nullptr) : json(pr.recall));
  }
  j["tie_break"] = "lowest-index";
  return j;
}

std::string MetricsReport::table(const std::vector<std::string>& class_names) const {
  std::ostringstream os;
  char buf[128];
  os << "confusion (row %, rows = true, cols = predicted)\n      ";
  for (int p = 0; p < classes; ++p) {
    std::snprintf(buf, sizeof buf, "%7s", class_name(class_names, p).c_str());
    os << buf;
  }
  os << "\n";
  const auto pct = confusion.row_percentages();
  for (int t = 0; t < classes; ++t) {
    std::snprintf(buf, sizeof buf, "%6s", class_name(class_names, t).c_str());
    os << buf;
    for (int p = 0; p < classes; ++p) {
      std::snprintf(buf, sizeof buf, "%7d", pct[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      os << buf;
    }
    os << "\n";
  }
  os << "\nclass      n  accuracy  precision  recall\n";
  for (int k = 0; k < classes; ++k) {
    const auto& acc = per_class_accuracy[static_cast<std::size_t>(k)];
    const auto& pr = per_class_pr[static_cast<std::size_t>(k)];
    std::string a = acc ? std::to_string(*acc).substr(0, 6) : "absent";
    std::string p = pr.precision_undefined ? "n/a" : std::to_string(pr.precision).substr(0, 6);
    std::string r = pr.recall_undefined ? "n/a" : std::to_string(pr.recall).substr(0, 6);
    std::snprintf(buf, sizeof buf, "%-6s %5ld  %8s  %9s  %6s\n", class_name(class_names, k).c_str(),
                  class_counts[static_cast<std::size_t>(k)], a.c_str(), p.c_str(), r.c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\naccuracy %.4f  worst-group %.4f  roc-auc %.4f (%s)\n", accuracy,
                worst_group_accuracy, roc_auc.value, roc_auc.scheme.c_str());
  os << buf;
  return os.str();
}

json mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DataError("no reports to average");
  const int c = reports.front().classes;
  double acc = 0, worst = 0, auc = 0;
  std::vector<double> cls_sum(static_cast<std::size_t>(c), 0.0);
  std::vector<int> cls_n(static_cast<std::size_t>(c), 0);
  for (const auto& r : reports) {
    acc += r.accuracy;
    worst += r.worst_group_accuracy;
    auc += r.roc_auc.value;
    for (int k = 0; k < c; ++k) {
      if (r.per_class_accuracy[static_cast<std::size_t>(k)]) {
        cls_sum[static_cast<std::size_t>(k)] += *r.per_class_accuracy[static_cast<std::size_t>(k)];
        ++cls_n[static_cast<std::size_t>(k)];
      }
    }
  }
  const double n = static_cast<double>(reports.size());
  json j;
  j["folds"] = reports.size();
  j["accuracy"] = acc / n;
  j["worst_group_accuracy"] = worst / n;
  j["roc_auc"] = auc / n;
  j["per_class_accuracy"] = json::array();
  for (int k = 0; k < c; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    j["per_class_accuracy"].push_back(cls_n[kk] ? json(cls_sum[kk] / cls_n[kk]) : json(nullptr));
  }
  return j;
}

}  // namespace gdce::eval
