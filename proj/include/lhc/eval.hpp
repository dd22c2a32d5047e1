#pragma once

#include <span>
#include <string>
#include <vector>

#include "lhc/core.hpp"
#include "lhc/data.hpp"
#include "lhc/learning.hpp"

namespace lhc {

struct ClassMetrics {
  double precision{0.0};
  double recall{0.0};
  double f1{0.0};
  std::size_t support{0};   // gold count
  std::size_t predicted{0}; // prediction count
};

/// Confusion rows are gold labels, columns are predictions. Macro averages
/// run over the classes that occur in the gold labels; a class that is never
/// predicted has precision 0.
struct MetricsReport {
  std::size_t total{0};
  double accuracy{0.0};
  double macro_precision{0.0};
  double macro_recall{0.0};
  double macro_f1{0.0};
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
};

/// Throws EmptyInput on empty input, LengthMismatch on unequal lengths and
/// LabelOutOfRange on ids >= n_classes.
[[nodiscard]] MetricsReport compute_metrics(std::span<const std::size_t> gold,
                                            std::span<const std::size_t> pred, std::size_t n_classes);

struct Evaluation {
  MetricsReport actions;    // pooled over all segments
  MetricsReport activities; // one item per sequence
};

[[nodiscard]] Evaluation evaluate(std::span<const DecodeResult> preds,
                                  std::span<const SegmentSequence> golds, const LabelSpace &space);

/// Applies the model's standardizer (if any) and decodes every sequence.
[[nodiscard]] std::vector<DecodeResult> predict(const Model &model,
                                                std::span<const SegmentSequence> data,
                                                std::size_t n_threads = 1);

/// Fits a standardizer on `train`, trains, and packages the model.
[[nodiscard]] Model fit_model(const Dataset &train, const Hyperparams &hp,
                              TrainReport *report = nullptr, const TrainOptions &options = {});

struct MetricSummary {
  double mean{0.0};
  double std_error{0.0};
};

struct SummaryBlock {
  MetricSummary accuracy, precision, recall, f1;
};

struct CvReport {
  /// Test subject of each fold (sorted).
  std::vector<std::string> fold_subjects;
  /// Record indices of each fold's test split.
  std::vector<std::vector<std::size_t>> fold_test_indices;
  std::vector<Evaluation> folds;
  SummaryBlock actions;
  SummaryBlock activities;
};

/// mean and sample-std / sqrt(n).
[[nodiscard]] MetricSummary summarize(std::span<const double> values);

/// Leave-one-subject-out: one fold per subject that has records. Each fold
/// fits a standardizer and a model on the other subjects and evaluates on
/// the held-out one. Throws InsufficientSubjects with fewer than 2 subjects.
[[nodiscard]] CvReport cross_validate(const Dataset &ds, const Hyperparams &hp,
                                      const TrainOptions &options = {});

/// Picks C from `grid` by holding out `validation_subject` from `ds` and
/// maximizing the mean of action and activity accuracy (ties keep the
/// earlier grid entry).
[[nodiscard]] double select_c(const Dataset &ds, const Hyperparams &hp, std::span<const double> grid,
                              const std::string &validation_subject);

/// Text and machine-readable renderings.
[[nodiscard]] std::string metrics_to_json(const Evaluation &ev, const Dataset &names);
[[nodiscard]] std::string metrics_to_text(const Evaluation &ev, const Dataset &names);
[[nodiscard]] std::string cv_to_json(const CvReport &cv, const Dataset &names);
[[nodiscard]] std::string cv_to_text(const CvReport &cv);
/// Aligned text grid with row/column labels.
[[nodiscard]] std::string confusion_grid(const MetricsReport &m, std::span<const std::string> names);
/// "gold<TAB>predicted<TAB>count" rows for plotting tools.
[[nodiscard]] std::string confusion_tsv(const MetricsReport &m, std::span<const std::string> names);

} // namespace lhc
