#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adpm/multiscale_ensemble.hpp"
#include "adpm/run_config.hpp"

namespace adpm {

struct MetricsReport {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::vector<std::size_t> class_counts;            // test samples per true class
  std::vector<double> per_class_accuracy;           // 0 for classes without samples
  double accuracy = 0.0;
  std::size_t total = 0;
};

MetricsReport report_metrics(std::span<const std::size_t> truth,
                             std::span<const std::size_t> predicted, std::size_t num_classes);

/// Element-wise sum of confusion matrices, with accuracies recomputed.
MetricsReport pool_metrics(std::span<const MetricsReport> parts);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// Result of scoring one train/test split.
struct TaskResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  MetricsReport metrics;
  std::map<std::string, double> scale_accuracy;
  std::map<std::string, std::vector<double>> weights;
  std::vector<MultiscaleResult> rows;
  std::map<std::string, StageTimings> timings;
};

struct PredictionReport {
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  TaskResult result;
  std::vector<std::string> warnings;
};

struct CrossvalReport {
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  std::vector<std::string> scales;
  std::vector<std::pair<std::string, std::string>> config;
  std::string protocol;  // "split_fraction=..." or "folds=..."
  std::vector<TaskResult> tasks;  // sorted by (repeat, fold)
  MeanStd accuracy;
  std::map<std::string, MeanStd> scale_accuracy;
  MetricsReport pooled;
};

/// Human-readable text. Contains no timing data, so identical inputs give
/// identical bytes.
void write_text_report(const CrossvalReport& report, std::ostream& out);
void write_text_report(const PredictionReport& report, std::ostream& out);

/// Tab-separated records, one fact per line, first field is the record kind.
void write_records(const CrossvalReport& report, std::ostream& out);
void write_records(const PredictionReport& report, std::ostream& out);

void write_timings(std::span<const TaskResult> tasks, std::ostream& out);

}  // namespace adpm
