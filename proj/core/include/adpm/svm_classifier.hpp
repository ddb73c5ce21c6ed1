#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "adpm/matrix.hpp"

namespace adpm {

struct SvmParams {
  double c = 1.0;
  double tol = 1e-3;             // KKT tolerance on y_i * E_i
  std::size_t max_passes = 50;   // cap on full sweeps over the training set
};

/// Binary kernel SVM. Support indices refer to rows of the training set the
/// kernel rows are computed against, which may be larger than the subset
/// the model was trained on (one-vs-one models share the full training set).
struct BinarySvmModel {
  std::size_t positive_class = 0;  // y = +1
  std::size_t negative_class = 1;  // y = -1
  double c = 1.0;
  double bias = 0.0;
  std::size_t num_train = 0;
  std::vector<std::size_t> support_indices;
  std::vector<double> alphas;  // in (0, C]
  std::vector<int> signs;      // +1 / -1
  bool converged = false;
  std::size_t passes = 0;
};

/// Trains on a precomputed PSD gram with labels in {+1, -1} using Platt's
/// SMO: first-violator scan order, second index by max |E_i - E_j| over
/// unbound multipliers. The bias is re-derived at the end from unbound
/// support vectors, or from the KKT interval midpoint when none exist.
BinarySvmModel train_binary_smo(const Matrix& gram, std::span<const int> y,
                                const SvmParams& params = {});

/// sum_i alpha_i y_i k_i + bias over the support vectors.
double decision_value(const BinarySvmModel& model, std::span<const double> kernel_row);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij for a
/// full-length multiplier vector.
double dual_objective(const Matrix& gram, std::span<const int> y, std::span<const double> alphas);

/// Dense multiplier vector of length model.num_train.
std::vector<double> dense_alphas(const BinarySvmModel& model);

struct OvoModel {
  std::size_t num_classes = 0;
  std::size_t num_train = 0;
  std::vector<BinarySvmModel> pairs;  // (0,1), (0,2), ..., (1,2), ...

  const BinarySvmModel& pair(std::size_t a, std::size_t b) const;
};

/// One binary model per unordered class pair, each trained on the sub-gram
/// of that pair's rows. Every class in [0, num_classes) needs a sample.
OvoModel train_ovo(const Matrix& gram, std::span<const std::size_t> labels,
                   std::size_t num_classes, const SvmParams& params = {});

struct OvoPrediction {
  std::size_t label = 0;
  std::vector<std::size_t> votes;  // per class
  std::vector<double> margins;     // per class: summed |decision| over won pairs
  double confidence = 0.0;         // margins[label]
};

/// Pairwise vote; ties go to the larger summed margin, then the lowest class.
OvoPrediction predict_ovo(const OvoModel& model, std::span<const double> kernel_row);
std::vector<OvoPrediction> predict_ovo(const OvoModel& model, const Matrix& kernel_rows);

void save_ovo_model(const OvoModel& model, const std::filesystem::path& path);
OvoModel load_ovo_model(const std::filesystem::path& path);

}  // namespace adpm
