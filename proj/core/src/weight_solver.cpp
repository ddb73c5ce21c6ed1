#include "adpm/weight_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>

#include "adpm/error.hpp"

namespace adpm {
namespace {

double frobenius_inner(const Matrix& x, const Matrix& y) {
  const auto a = x.values(), b = y.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

std::vector<double> gradient(const QPProblem& qp, std::span<const double> w) {
  const std::size_t n = qp.dim();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double qw = qp.lambda * w[i];
    for (std::size_t j = 0; j < n; ++j) qw += qp.a(i, j) * w[j];
    g[i] = 2.0 * qw - 2.0 * qp.b[i];
  }
  return g;
}

double distance(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(sum);
}

std::vector<double> step(std::span<const double> w, std::span<const double> g, double t) {
  std::vector<double> v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] - t * g[i];
  return project_to_simplex(v);
}

// Solves the dense system m x = r in place by Gaussian elimination with
// partial pivoting. Returns false when a pivot vanishes.
bool solve_dense(std::vector<std::vector<double>> m, std::vector<double> r,
                 std::vector<double>& x) {
  const std::size_t n = r.size();
  double scale = 0.0;
  for (const auto& row : m) {
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i) {
      if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
    }
    if (std::abs(m[piv][col]) <= 1e-14 * scale) return false;
    std::swap(m[piv], m[col]);
    std::swap(r[piv], r[col]);
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = m[i][col] / m[col][col];
      for (std::size_t k = col; k < n; ++k) m[i][k] -= f * m[col][k];
      r[i] -= f * r[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = r[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= m[i][k] * x[k];
    x[i] = s / m[i][i];
  }
  return true;
}

// Minimizer of the objective on the affine hull of the support of w, i.e.
// the KKT system [2Q_SS 1; 1' 0][w_S; nu] = [2b_S; 1]. Empty when that point
// leaves the simplex or the system is singular.
std::optional<std::vector<double>> support_minimizer(const QPProblem& qp,
                                                     std::span<const double> w) {
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) support.push_back(i);
  }
  const std::size_t s = support.size();
  if (s == 0) return std::nullopt;
  std::vector<std::vector<double>> m(s + 1, std::vector<double>(s + 1, 0.0));
  std::vector<double> r(s + 1, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      m[i][j] = 2.0 * qp.a(support[i], support[j]) + (i == j ? 2.0 * qp.lambda : 0.0);
    }
    m[i][s] = 1.0;
    m[s][i] = 1.0;
    r[i] = 2.0 * qp.b[support[i]];
  }
  r[s] = 1.0;
  std::vector<double> x;
  if (!solve_dense(std::move(m), std::move(r), x)) return std::nullopt;

  std::vector<double> out(w.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    if (!std::isfinite(x[i]) || x[i] < 0.0) return std::nullopt;
    out[support[i]] = x[i];
    sum += x[i];
  }
  if (!(sum > 0.0)) return std::nullopt;
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

void QPProblem::validate() const {
  const std::size_t n = b.size();
  if (n == 0) throw ValidationError("QP has dimension zero");
  if (a.rows() != n || a.cols() != n) throw ValidationError("QP matrix A has the wrong shape");
  for (double v : a.values()) {
    if (!std::isfinite(v)) throw ValidationError("QP matrix A has a non-finite entry");
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw ValidationError("QP vector b has a non-finite entry");
  }
  if (!std::isfinite(c)) throw ValidationError("QP constant c is non-finite");
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ValidationError("QP regularizer lambda must be finite and >= 0");
  }
  if (!is_symmetric(a)) throw ValidationError("QP matrix A is not symmetric");
}

QPProblem assemble_qp(std::span<const Matrix> grams, const IdealKernel& ideal, double lambda) {
  const std::size_t layers = grams.size();
  const std::size_t n = ideal.y.rows();
  if (layers == 0) throw ValidationError("assemble_qp needs at least one gram");
  if (!ideal.y.square()) throw ValidationError("ideal matrix is not square");
  for (std::size_t l = 0; l < layers; ++l) {
    if (grams[l].rows() != n || grams[l].cols() != n) {
      throw ValidationError("gram " + std::to_string(l) + " does not match the ideal matrix size " +
                            std::to_string(n));
    }
    if (!is_symmetric(grams[l])) {
      throw ValidationError("gram " + std::to_string(l) + " is not symmetric");
    }
  }
  QPProblem qp;
  qp.lambda = lambda;
  qp.a = Matrix(layers, layers);
  qp.b.resize(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    for (std::size_t j = i; j < layers; ++j) {
      qp.a(i, j) = qp.a(j, i) = frobenius_inner(grams[i], grams[j]);
    }
    qp.b[i] = frobenius_inner(ideal.y, grams[i]);
  }
  qp.c = frobenius_inner(ideal.y, ideal.y);
  qp.validate();
  return qp;
}

double qp_objective(const QPProblem& qp, std::span<const double> w) {
  const std::size_t n = qp.dim();
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double qw = qp.lambda * w[i];
    for (std::size_t j = 0; j < n; ++j) qw += qp.a(i, j) * w[j];
    quad += w[i] * qw;
    lin += qp.b[i] * w[i];
  }
  return quad - 2.0 * lin;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw ValidationError("cannot project an empty vector onto the simplex");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += sorted[k];
    const double candidate = (running - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> w(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::max(v[i] - theta, 0.0);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

WeightSolution solve_simplex_qp(const QPProblem& qp, double tol, std::size_t max_iter) {
  qp.validate();
  const std::size_t n = qp.dim();

  // Gershgorin bound on the largest eigenvalue of 2(A + lambda I).
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = qp.lambda;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(qp.a(i, j));
    lip = std::max(lip, 2.0 * row);
  }
  if (!(lip > 0.0)) lip = 1.0;
  const double unit_step = 1.0 / lip;

  WeightSolution sol;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  double f = qp_objective(qp, w);
  sol.objective_history.push_back(f);
  double t = unit_step;

  auto residual = [&](std::span<const double> x, std::span<const double> g) {
    return distance(x, step(x, g, unit_step));
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const auto g = gradient(qp, w);
    if (residual(w, g) <= tol) {
      sol.converged = true;
      break;
    }
    sol.iterations = iter + 1;

    // Armijo backtracking on the projected step, starting from twice the
    // last accepted length.
    t = std::max(2.0 * t, unit_step);
    std::vector<double> next;
    double f_next = 0.0;
    for (int shrink = 0; shrink < 60; ++shrink) {
      next = step(w, g, t);
      f_next = qp_objective(qp, next);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        lin += g[i] * (next[i] - w[i]);
        sq += (next[i] - w[i]) * (next[i] - w[i]);
      }
      if (f_next <= f + lin + sq / (2.0 * t) || t <= unit_step) break;
      t *= 0.5;
    }
    if (f_next > f) {
      next = w;
      f_next = f;
    }

    if (auto polished = support_minimizer(qp, next)) {
      const double f_polished = qp_objective(qp, *polished);
      if (f_polished <= f_next) {
        next = std::move(*polished);
        f_next = f_polished;
      }
    }
    w = std::move(next);
    f = f_next;
    sol.objective_history.push_back(f);
  }
  if (!sol.converged) sol.converged = residual(w, gradient(qp, w)) <= tol;

  sol.weights = std::move(w);
  sol.objective = f;
  return sol;
}

WeightSolution learn_weights(std::span<const Matrix> grams, std::span<const std::size_t> labels,
                             double lambda, double tol, std::size_t max_iter) {
  if (labels.empty()) throw ValidationError("learn_weights needs labels");
  const auto qp = assemble_qp(grams, ideal_matrix(labels), lambda);
  return solve_simplex_qp(qp, tol, max_iter);
}

}  // namespace adpm
