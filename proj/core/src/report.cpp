#include "adpm/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>

#include "adpm/error.hpp"

namespace adpm {
namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string weight_list(const std::vector<double>& w, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += sep;
    out += sig12(w[i]);
  }
  return out;
}

void write_metrics_text(const MetricsReport& m, std::ostream& out) {
  out << "per-class accuracy:\n";
  for (std::size_t k = 0; k < m.num_classes; ++k) {
    out << "  class " << std::setw(3) << k << "  " << fixed(m.per_class_accuracy[k])
        << "  (n=" << m.class_counts[k] << ")\n";
  }
  out << "confusion matrix (rows = truth, columns = predicted):\n";
  for (const auto& row : m.confusion) {
    out << " ";
    for (auto v : row) out << ' ' << std::setw(5) << v;
    out << '\n';
  }
}

void write_metrics_records(const MetricsReport& m, const std::string& prefix, std::ostream& out) {
  for (std::size_t k = 0; k < m.num_classes; ++k) {
    out << prefix << "class_accuracy\t" << k << '\t' << fixed(m.per_class_accuracy[k], 6) << '\t'
        << m.class_counts[k] << '\n';
  }
  for (std::size_t t = 0; t < m.num_classes; ++t) {
    for (std::size_t p = 0; p < m.num_classes; ++p) {
      out << prefix << "confusion\t" << t << '\t' << p << '\t' << m.confusion[t][p] << '\n';
    }
  }
}

void write_rows(const TaskResult& task, const std::string& prefix, std::ostream& out) {
  for (const auto& row : task.rows) {
    out << prefix << "prediction\t" << row.image_id;
    for (const auto& s : row.per_scale) out << '\t' << s.scale_tag << '=' << s.predicted;
    for (const auto& s : row.missing_scales) out << '\t' << s << "=missing";
    out << "\tfinal=" << row.predicted << "\ttruth=" << row.truth << '\n';
  }
}

}  // namespace

MetricsReport report_metrics(std::span<const std::size_t> truth,
                             std::span<const std::size_t> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("truth and prediction vectors differ in length");
  }
  if (num_classes == 0) throw ValidationError("num_classes must be positive");
  MetricsReport m;
  m.num_classes = num_classes;
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw ValidationError("label out of range at position " + std::to_string(i));
    }
    ++m.confusion[truth[i]][predicted[i]];
  }
  std::vector<MetricsReport> one{m};
  return pool_metrics(one);
}

MetricsReport pool_metrics(std::span<const MetricsReport> parts) {
  if (parts.empty()) throw ValidationError("nothing to pool");
  MetricsReport m;
  m.num_classes = parts.front().num_classes;
  m.confusion.assign(m.num_classes, std::vector<std::size_t>(m.num_classes, 0));
  for (const auto& part : parts) {
    if (part.num_classes != m.num_classes) throw ValidationError("class counts differ");
    for (std::size_t t = 0; t < m.num_classes; ++t) {
      for (std::size_t p = 0; p < m.num_classes; ++p) m.confusion[t][p] += part.confusion[t][p];
    }
  }
  m.class_counts.assign(m.num_classes, 0);
  m.per_class_accuracy.assign(m.num_classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < m.num_classes; ++t) {
    for (auto v : m.confusion[t]) m.class_counts[t] += v;
    correct += m.confusion[t][t];
    m.total += m.class_counts[t];
    if (m.class_counts[t] > 0) {
      m.per_class_accuracy[t] =
          static_cast<double>(m.confusion[t][t]) / static_cast<double>(m.class_counts[t]);
    }
  }
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return r;
}

void write_text_report(const CrossvalReport& report, std::ostream& out) {
  out << "ADPM cross-validation report\n"
      << "protocol: " << report.protocol << '\n'
      << "classes: " << report.num_classes << "  layers:";
  for (const auto& l : report.layer_names) out << ' ' << l;
  out << "  scales:";
  for (const auto& s : report.scales) out << ' ' << s;
  out << "\n\nconfiguration:\n";
  for (const auto& [k, v] : report.config) out << "  " << k << " = " << v << '\n';

  out << "\noverall accuracy: " << fixed(report.accuracy.mean) << " +/- "
      << fixed(report.accuracy.std) << "  over " << report.tasks.size() << " runs\n";
  for (const auto& [scale, ms] : report.scale_accuracy) {
    out << "  scale " << scale << " alone: " << fixed(ms.mean) << " +/- " << fixed(ms.std) << '\n';
  }

  out << "\nper-run results:\n";
  for (const auto& task : report.tasks) {
    out << "  repeat " << task.repeat << " fold " << task.fold << ": accuracy "
        << fixed(task.metrics.accuracy) << '\n';
    for (const auto& [scale, w] : task.weights) {
      out << "    weights[" << scale << "] = (" << weight_list(w, ", ") << ")\n";
    }
  }
  out << "\npooled over all runs:\n";
  write_metrics_text(report.pooled, out);
}

void write_text_report(const PredictionReport& report, std::ostream& out) {
  out << "ADPM prediction report\n"
      << "classes: " << report.num_classes << "  images: " << report.result.rows.size() << '\n'
      << "accuracy: " << fixed(report.result.metrics.accuracy) << '\n';
  for (const auto& [scale, acc] : report.result.scale_accuracy) {
    out << "  scale " << scale << " alone: " << fixed(acc) << '\n';
  }
  for (const auto& [scale, w] : report.result.weights) {
    out << "weights[" << scale << "] = (" << weight_list(w, ", ") << ")\n";
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  write_metrics_text(report.result.metrics, out);
}

void write_records(const CrossvalReport& report, std::ostream& out) {
  out << "protocol\t" << report.protocol << '\n'
      << "num_classes\t" << report.num_classes << '\n';
  for (const auto& [k, v] : report.config) out << "config\t" << k << '\t' << v << '\n';
  for (const auto& task : report.tasks) {
    const std::string prefix =
        "run\t" + std::to_string(task.repeat) + '\t' + std::to_string(task.fold) + '\t';
    out << prefix << "accuracy\t" << fixed(task.metrics.accuracy, 6) << '\n';
    for (const auto& [scale, acc] : task.scale_accuracy) {
      out << prefix << "scale_accuracy\t" << scale << '\t' << fixed(acc, 6) << '\n';
    }
    for (const auto& [scale, w] : task.weights) {
      out << prefix << "weights\t" << scale << '\t' << weight_list(w, ",") << '\n';
    }
    write_rows(task, prefix, out);
  }
  out << "summary\taccuracy_mean\t" << fixed(report.accuracy.mean, 6) << '\n'
      << "summary\taccuracy_std\t" << fixed(report.accuracy.std, 6) << '\n';
  for (const auto& [scale, ms] : report.scale_accuracy) {
    out << "summary\tscale_accuracy_mean\t" << scale << '\t' << fixed(ms.mean, 6) << '\n'
        << "summary\tscale_accuracy_std\t" << scale << '\t' << fixed(ms.std, 6) << '\n';
  }
  write_metrics_records(report.pooled, "pooled\t", out);
}

void write_records(const PredictionReport& report, std::ostream& out) {
  out << "num_classes\t" << report.num_classes << '\n'
      << "accuracy\t" << fixed(report.result.metrics.accuracy, 6) << '\n';
  for (const auto& [scale, acc] : report.result.scale_accuracy) {
    out << "scale_accuracy\t" << scale << '\t' << fixed(acc, 6) << '\n';
  }
  for (const auto& [scale, w] : report.result.weights) {
    out << "weights\t" << scale << '\t' << weight_list(w, ",") << '\n';
  }
  for (const auto& w : report.warnings) out << "warning\t" << w << '\n';
  write_rows(report.result, "", out);
  write_metrics_records(report.result.metrics, "", out);
}

void write_timings(std::span<const TaskResult> tasks, std::ostream& out) {
  out << "repeat\tfold\tscale\tcodebooks_s\tencoding_s\tgrams_s\tweights_s\tsvm_s\n";
  for (const auto& task : tasks) {
    for (const auto& [scale, t] : task.timings) {
      out << task.repeat << '\t' << task.fold << '\t' << scale << '\t' << fixed(t.codebooks, 4)
          << '\t' << fixed(t.encoding, 4) << '\t' << fixed(t.grams, 4) << '\t'
          << fixed(t.weights, 4) << '\t' << fixed(t.svm, 4) << '\n';
    }
  }
}

}  // namespace adpm
