#include "adpm/svm_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "adpm/error.hpp"
#include "adpm/parallel.hpp"

namespace adpm {
namespace {

class SmoSolver {
public:
  SmoSolver(const Matrix& k, std::span<const int> y, const SvmParams& p)
      : k_(k), y_(y), c_(p.c), tol_(p.tol), n_(y.size()), alpha_(n_, 0.0), g_(n_, 0.0) {}

  void run(std::size_t max_passes) {
    bool examine_all = true;
    std::size_t changed = 0;
    // Bounded inner sweeps; SMO converges long before this on desk-scale data.
    const std::size_t max_inner = 1000 * std::max<std::size_t>(n_, 1);
    std::size_t inner = 0;
    while (changed > 0 || examine_all) {
      if (examine_all && full_passes_ >= max_passes) break;
      if (!examine_all && ++inner > max_inner) {
        examine_all = true;
        continue;
      }
      changed = 0;
      if (examine_all) {
        ++full_passes_;
        for (std::size_t i = 0; i < n_; ++i) changed += examine(i);
      } else {
        for (std::size_t i = 0; i < n_; ++i) {
          if (unbound(i)) changed += examine(i);
        }
      }
      if (examine_all) {
        if (changed == 0) {
          converged_ = true;
          break;
        }
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
    }
    finalize_bias();
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return b_; }
  bool converged() const { return converged_; }
  std::size_t passes() const { return full_passes_; }

private:
  double error(std::size_t i) const { return g_[i] + b_ - y_[i]; }
  bool unbound(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  int examine(std::size_t i2) {
    const double e2 = error(i2);
    const double r2 = e2 * y_[i2];
    if (!((r2 < -tol_ && alpha_[i2] < c_) || (r2 > tol_ && alpha_[i2] > 0.0))) return 0;

    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i == i2 || !unbound(i)) continue;
      const double gap = std::abs(error(i) - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best != n_ && take_step(best, i2)) return 1;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i != i2 && unbound(i) && take_step(i, i2)) return 1;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      if (i != i2 && !unbound(i) && take_step(i, i2)) return 1;
    }
    return 0;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const int y1 = y_[i1], y2 = y_[i2];
    const double e1 = error(i1), e2 = error(i2);
    const int s = y1 * y2;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    const double k11 = k_(i1, i1), k12 = k_(i1, i2), k22 = k_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2_new;
    if (eta > 0.0) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // eta <= 0: the dual is linear along the constraint line, so compare
      // its value at both ends (f1, f2 follow Platt with u = g + b).
      const double f1 = y1 * (e1 + y1 - b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + y2 - b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double obj_lo = l1 * (1 - f1) + lo * (1 - f2) - 0.5 * l1 * l1 * k11 -
                            0.5 * lo * lo * k22 - s * lo * l1 * k12;
      const double obj_hi = h1 * (1 - f1) + hi * (1 - f2) - 0.5 * h1 * h1 * k11 -
                            0.5 * hi * hi * k22 - s * hi * h1 * k12;
      constexpr double kEps = 1e-12;
      if (obj_lo > obj_hi + kEps) a2_new = lo;
      else if (obj_hi > obj_lo + kEps) a2_new = hi;
      else a2_new = a2;
    }
    constexpr double kAlphaEps = 1e-12;
    if (std::abs(a2_new - a2) < kAlphaEps * (a2_new + a2 + kAlphaEps)) return false;

    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < 0.0) {
      a2_new += s * a1_new;
      a1_new = 0.0;
    } else if (a1_new > c_) {
      a2_new += s * (a1_new - c_);
      a1_new = c_;
    }
    a2_new = std::clamp(a2_new, 0.0, c_);

    const double d1 = y1 * (a1_new - a1);
    const double d2 = y2 * (a2_new - a2);
    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    if (a1_new > 0.0 && a1_new < c_) b_ = b1;
    else if (a2_new > 0.0 && a2_new < c_) b_ = b2;
    else b_ = 0.5 * (b1 + b2);

    for (std::size_t i = 0; i < n_; ++i) g_[i] += d1 * k_(i, i1) + d2 * k_(i, i2);
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    return true;
  }

  void finalize_bias() {
    double sum = 0.0;
    std::size_t count = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
      const double target = y_[i] - g_[i];  // bias that puts i on the margin
      if (unbound(i)) {
        sum += target;
        ++count;
      } else if ((alpha_[i] <= 0.0) == (y_[i] > 0)) {
        lower = std::max(lower, target);  // alpha=0,y=+1 or alpha=C,y=-1
      } else {
        upper = std::min(upper, target);
      }
    }
    if (count > 0) {
      b_ = sum / static_cast<double>(count);
    } else if (std::isfinite(lower) && std::isfinite(upper)) {
      b_ = 0.5 * (lower + upper);
    } else if (std::isfinite(lower)) {
      b_ = lower;
    } else if (std::isfinite(upper)) {
      b_ = upper;
    }
  }

  const Matrix& k_;
  std::span<const int> y_;
  double c_;
  double tol_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> g_;  // sum_j alpha_j y_j K_ij
  double b_ = 0.0;
  bool converged_ = false;
  std::size_t full_passes_ = 0;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

BinarySvmModel train_binary_smo(const Matrix& gram, std::span<const int> y,
                                const SvmParams& params) {
  const std::size_t n = y.size();
  if (gram.rows() != n || gram.cols() != n) {
    throw ValidationError("SVM gram is " + std::to_string(gram.rows()) + "x" +
                          std::to_string(gram.cols()) + " for " + std::to_string(n) + " labels");
  }
  if (!(params.c > 0.0) || !std::isfinite(params.c)) throw ValidationError("SVM C must be positive");
  if (!(params.tol > 0.0)) throw ValidationError("SVM tolerance must be positive");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw ValidationError("SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw ValidationError("SVM training needs both classes present");
  for (double v : gram.values()) {
    if (!std::isfinite(v)) throw ValidationError("SVM gram has a non-finite entry");
  }

  SmoSolver solver(gram, y, params);
  solver.run(params.max_passes);

  BinarySvmModel model;
  model.c = params.c;
  model.bias = solver.bias();
  model.num_train = n;
  model.converged = solver.converged();
  model.passes = solver.passes();
  const auto& alpha = solver.alphas();
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 0.0) {
      model.support_indices.push_back(i);
      model.alphas.push_back(alpha[i]);
      model.signs.push_back(y[i]);
    }
  }
  return model;
}

double decision_value(const BinarySvmModel& model, std::span<const double> kernel_row) {
  if (kernel_row.size() != model.num_train) {
    throw ValidationError("kernel row has " + std::to_string(kernel_row.size()) +
                          " entries, model expects " + std::to_string(model.num_train));
  }
  double sum = model.bias;
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
    sum += model.alphas[s] * model.signs[s] * kernel_row[model.support_indices[s]];
  }
  return sum;
}

double dual_objective(const Matrix& gram, std::span<const int> y, std::span<const double> alphas) {
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    linear += alphas[i];
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      quad += alphas[i] * alphas[j] * y[i] * y[j] * gram(i, j);
    }
  }
  return linear - 0.5 * quad;
}

std::vector<double> dense_alphas(const BinarySvmModel& model) {
  std::vector<double> out(model.num_train, 0.0);
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
    out[model.support_indices[s]] = model.alphas[s];
  }
  return out;
}

const BinarySvmModel& OvoModel::pair(std::size_t a, std::size_t b) const {
  if (a == b || a >= num_classes || b >= num_classes) {
    throw ValidationError("no one-vs-one model for classes " + std::to_string(a) + "," +
                          std::to_string(b));
  }
  if (a > b) std::swap(a, b);
  // Pairs are laid out row by row of the upper triangle.
  const std::size_t index = a * (2 * num_classes - a - 1) / 2 + (b - a - 1);
  return pairs[index];
}

OvoModel train_ovo(const Matrix& gram, std::span<const std::size_t> labels,
                   std::size_t num_classes, const SvmParams& params) {
  const std::size_t n = labels.size();
  if (gram.rows() != n || gram.cols() != n) {
    throw ValidationError("one-vs-one gram does not match label count");
  }
  if (num_classes < 2) throw ValidationError("one-vs-one needs at least 2 classes");
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " >= num_classes " +
                            std::to_string(num_classes));
    }
    members[labels[i]].push_back(i);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < num_classes; ++a) {
    for (std::size_t b = a + 1; b < num_classes; ++b) {
      if (members[a].empty() || members[b].empty()) {
        throw ValidationError("cannot train pair (" + std::to_string(a) + "," +
                              std::to_string(b) + "): class " +
                              std::to_string(members[a].empty() ? a : b) + " has no samples");
      }
      pairs.emplace_back(a, b);
    }
  }

  OvoModel model;
  model.num_classes = num_classes;
  model.num_train = n;
  model.pairs.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    std::vector<std::size_t> rows = members[a];
    rows.insert(rows.end(), members[b].begin(), members[b].end());
    std::sort(rows.begin(), rows.end());
    Matrix sub(rows.size(), rows.size());
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      y[i] = labels[rows[i]] == a ? 1 : -1;
      for (std::size_t j = 0; j < rows.size(); ++j) sub(i, j) = gram(rows[i], rows[j]);
    }
    BinarySvmModel binary = train_binary_smo(sub, y, params);
    for (auto& idx : binary.support_indices) idx = rows[idx];
    binary.num_train = n;
    binary.positive_class = a;
    binary.negative_class = b;
    model.pairs[p] = std::move(binary);
  });
  return model;
}

OvoPrediction predict_ovo(const OvoModel& model, std::span<const double> kernel_row) {
  OvoPrediction pred;
  pred.votes.assign(model.num_classes, 0);
  pred.margins.assign(model.num_classes, 0.0);
  for (const auto& binary : model.pairs) {
    const double f = decision_value(binary, kernel_row);
    const std::size_t winner = f > 0.0 ? binary.positive_class : binary.negative_class;
    ++pred.votes[winner];
    pred.margins[winner] += std::abs(f);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < model.num_classes; ++k) {
    if (pred.votes[k] > pred.votes[best] ||
        (pred.votes[k] == pred.votes[best] && pred.margins[k] > pred.margins[best])) {
      best = k;
    }
  }
  pred.label = best;
  pred.confidence = pred.margins[best];
  return pred;
}

std::vector<OvoPrediction> predict_ovo(const OvoModel& model, const Matrix& kernel_rows) {
  if (kernel_rows.cols() != model.num_train) {
    throw ValidationError("kernel rows have " + std::to_string(kernel_rows.cols()) +
                          " columns, model was trained on " + std::to_string(model.num_train));
  }
  std::vector<OvoPrediction> out;
  out.reserve(kernel_rows.rows());
  for (std::size_t i = 0; i < kernel_rows.rows(); ++i) {
    out.push_back(predict_ovo(model, kernel_rows.row(i)));
  }
  return out;
}

void save_ovo_model(const OvoModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing", 0);
  out << "adpm-ovo 1\n"
      << "num_classes " << model.num_classes << '\n'
      << "num_train " << model.num_train << '\n';
  for (const auto& m : model.pairs) {
    out << "pair " << m.positive_class << ' ' << m.negative_class << " c " << fmt_double(m.c)
        << " bias " << fmt_double(m.bias) << " converged " << (m.converged ? 1 : 0)
        << " passes " << m.passes << " sv " << m.support_indices.size() << '\n';
    for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
      out << m.support_indices[s] << ' ' << fmt_double(m.alphas[s]) << ' ' << m.signs[s] << '\n';
    }
  }
  if (!out) throw IoError("model write failed", static_cast<std::uint64_t>(out.tellp()));
}

OvoModel load_ovo_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model '" + path.string() + "'");
  auto fail = [&](const std::string& why) {
    return FormatError(path.string() + ": " + why);
  };
  std::string magic, key;
  int version = 0;
  OvoModel model;
  if (!(in >> magic >> version) || magic != "adpm-ovo" || version != 1) {
    throw fail("not an adpm-ovo v1 model");
  }
  if (!(in >> key >> model.num_classes) || key != "num_classes") throw fail("missing num_classes");
  if (!(in >> key >> model.num_train) || key != "num_train") throw fail("missing num_train");
  const std::size_t expected = model.num_classes * (model.num_classes - 1) / 2;
  for (std::size_t p = 0; p < expected; ++p) {
    BinarySvmModel m;
    std::string k_c, k_bias, k_conv, k_passes, k_sv, c_text, bias_text;
    int converged = 0;
    std::size_t count = 0;
    if (!(in >> key >> m.positive_class >> m.negative_class >> k_c >> c_text >> k_bias >>
          bias_text >> k_conv >> converged >> k_passes >> m.passes >> k_sv >> count) ||
        key != "pair" || k_c != "c" || k_bias != "bias" || k_conv != "converged" ||
        k_passes != "passes" || k_sv != "sv") {
      throw fail("malformed pair header " + std::to_string(p));
    }
    m.c = std::strtod(c_text.c_str(), nullptr);
    m.bias = std::strtod(bias_text.c_str(), nullptr);
    m.converged = converged != 0;
    m.num_train = model.num_train;
    for (std::size_t s = 0; s < count; ++s) {
      std::size_t idx = 0;
      std::string alpha_text;
      int sign = 0;
      if (!(in >> idx >> alpha_text >> sign) || idx >= model.num_train ||
          (sign != 1 && sign != -1)) {
        throw fail("malformed support vector in pair " + std::to_string(p));
      }
      m.support_indices.push_back(idx);
      m.alphas.push_back(std::strtod(alpha_text.c_str(), nullptr));
      m.signs.push_back(sign);
    }
    model.pairs.push_back(std::move(m));
  }
  return model;
}

}  // namespace adpm
