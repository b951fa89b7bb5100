#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gdce::eval {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<long> counts;

  long at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) +
                  static_cast<std::size_t>(pred)];
  }
  long row_total(int truth) const;
  long total() const;
  // Integer row percentages that sum to exactly 100 for every non-empty row
  // (largest-remainder rounding); empty rows are all zero.
  std::vector<std::vector<int>> row_percentages() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int classes);

// Index of the largest score; ties go to the lowest index.
int argmax(std::span<const double> scores);

// Mann-Whitney AUC with mid-rank tie handling. Returns nullopt when either
// class is absent.
std::optional<double> binary_auc(std::span<const double> scores, std::span<const bool> positive);

struct AucResult {
  double value = 0.0;
  std::vector<std::optional<double>> per_class;  // one-vs-rest
  std::vector<int> skipped_classes;              // absent from labels
  std::string scheme;                            // "binary" or "macro-ovr"
};

// `probs` is row-major [sample][class]. Two classes: AUC of the class-1
// score. More: macro average of one-vs-rest AUCs over classes present.
AucResult roc_auc(std::span<const double> probs, std::span<const int> labels, int classes);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_undefined = false;  // no positive predictions
  bool recall_undefined = false;     // no positive labels
};

PrecisionRecall precision_recall(std::span<const int> preds, std::span<const int> labels, int positive_class);
PrecisionRecall precision_recall(const ConfusionMatrix& cm, int positive_class);

struct GroupAccuracy {
  double accuracy = 0.0;
  long count = 0;
};

// Minimum accuracy over groups that have at least one sample.
double worst_group(std::span<const GroupAccuracy> groups);

struct MetricsReport {
  int classes = 0;
  long n_samples = 0;
  ConfusionMatrix confusion;
  std::vector<long> class_counts;
  std::vector<std::optional<double>> per_class_accuracy;  // nullopt: absent group
  double accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  AucResult roc_auc;
  std::vector<PrecisionRecall> per_class_pr;

  nlohmann::json to_json(const std::vector<std::string>& class_names = {}) const;
  std::string table(const std::vector<std::string>& class_names = {}) const;
};

MetricsReport evaluate(std::span<const double> probs, std::span<const int> labels, int classes);

// Element-wise mean of reports; fields that are absent in every report stay
// absent.
nlohmann::json mean_report(const std::vector<MetricsReport>& reports);

}  // namespace gdce::eval
