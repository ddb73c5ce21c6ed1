#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adpm/kernel_engine.hpp"
#include "adpm/matrix.hpp"

namespace adpm {

inline constexpr double kDefaultLambda = 0.5;

/// Kernel-alignment problem  min_w  w'(A + lambda I)w - 2 b'w  over the
/// probability simplex, where A(i,j) = <K_i, K_j>_F, b(j) = <Y, K_j>_F and
/// c = <Y, Y>_F, so that ||sum_l w_l K_l - Y||_F^2 = w'Aw - 2b'w + c.
struct QPProblem {
  Matrix a;
  std::vector<double> b;
  double c = 0.0;
  double lambda = kDefaultLambda;

  std::size_t dim() const noexcept { return b.size(); }
  void validate() const;
};

struct WeightSolution {
  std::vector<double> weights;
  double objective = 0.0;  // w'(A + lambda I)w - 2b'w, without c
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // starting point first
};

QPProblem assemble_qp(std::span<const Matrix> grams, const IdealKernel& ideal, double lambda);

/// w'(A + lambda I)w - 2b'w.
double qp_objective(const QPProblem& qp, std::span<const double> w);

/// Euclidean projection onto {w >= 0, sum w = 1}, by sorting.
std::vector<double> project_to_simplex(std::span<const double> v);

/// Projected gradient descent from the uniform point with Armijo
/// backtracking. Stops once ||w - P(w - grad/Lip)|| <= tol, where Lip is a
/// Gershgorin bound on the gradient's Lipschitz constant. Each iterate is
/// also tried against the exact minimizer on its current support, which is
/// accepted only when it lowers the objective.
WeightSolution solve_simplex_qp(const QPProblem& qp, double tol = 1e-9,
                                std::size_t max_iter = 10000);

/// ideal_matrix -> assemble_qp -> solve_simplex_qp.
WeightSolution learn_weights(std::span<const Matrix> grams, std::span<const std::size_t> labels,
                             double lambda = kDefaultLambda, double tol = 1e-9,
                             std::size_t max_iter = 10000);

}  // namespace adpm
