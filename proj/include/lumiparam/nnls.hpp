#ifndef LUMIPARAM_NNLS_HPP
#define LUMIPARAM_NNLS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lumiparam {

struct NnlsResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
};

/// min ||A x - b||^2 subject to x >= 0, by projected gradient descent on the
/// normal equations. `A` is row-major rows x cols.
///
/// Step size is 1 / L with L the Gershgorin bound on the largest eigenvalue of
/// A^T A. Stops when no coordinate moves more than tol * max(1, |x|_inf).
inline NnlsResult nnls_projected_gradient(const std::vector<double> &A, const std::vector<double> &b, std::size_t cols,
                                          double tol = 1e-8, int max_iterations = 10000) {
  if (cols == 0) return {{}, 0, true};
  const std::size_t rows = b.size();
  if (A.size() != rows * cols) throw std::invalid_argument("nnls: matrix size mismatch");

  std::vector<double> gram(cols * cols, 0.0), atb(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double *row = A.data() + r * cols;
    for (std::size_t i = 0; i < cols; ++i) {
      atb[i] += row[i] * b[r];
      for (std::size_t j = 0; j < cols; ++j) gram[i * cols + j] += row[i] * row[j];
    }
  }
  double lipschitz = 0;
  for (std::size_t i = 0; i < cols; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < cols; ++j) s += std::abs(gram[i * cols + j]);
    lipschitz = std::max(lipschitz, s);
  }
  NnlsResult out;
  out.x.assign(cols, 0.0);
  if (lipschitz == 0) {
    out.converged = true;
    return out;
  }
  const double step = 1.0 / lipschitz;
  // Start from the clamped diagonal solution.
  for (std::size_t i = 0; i < cols; ++i)
    if (gram[i * cols + i] > 0) out.x[i] = std::max(0.0, atb[i] / gram[i * cols + i]);

  std::vector<double> next(cols);
  for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
    double moved = 0, scale = 1;
    for (std::size_t i = 0; i < cols; ++i) {
      double g = -atb[i];
      for (std::size_t j = 0; j < cols; ++j) g += gram[i * cols + j] * out.x[j];
      next[i] = std::max(0.0, out.x[i] - step * g);
    }
    for (std::size_t i = 0; i < cols; ++i) {
      moved = std::max(moved, std::abs(next[i] - out.x[i]));
      scale = std::max(scale, std::abs(next[i]));
    }
    out.x.swap(next);
    if (moved <= tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.iterations = std::min(out.iterations, max_iterations);
  return out;
}

} // namespace lumiparam

#endif // LUMIPARAM_NNLS_HPP
