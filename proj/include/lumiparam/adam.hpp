#ifndef LUMIPARAM_ADAM_HPP
#define LUMIPARAM_ADAM_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace lumiparam {

struct AdamParameters {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second-moment optimizer with bias correction over a flat parameter
/// vector. Call step() once per iteration with the current gradient.
class Adam {
public:
  Adam(std::size_t size, AdamParameters params) : params_(params), m_(size, 0.0), v_(size, 0.0) {
    if (!(params.beta1 >= 0 && params.beta1 < 1 && params.beta2 >= 0 && params.beta2 < 1))
      throw std::invalid_argument("Adam: betas must be in [0, 1)");
  }

  /// x -= lr * m_hat / (sqrt(v_hat) + eps). `learning_rate` overrides the
  /// configured rate for this step (schedules).
  void step(std::span<double> x, std::span<const double> grad, double learning_rate) {
    if (x.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad[i];
      v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
      x[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + params_.epsilon);
    }
  }
  void step(std::span<double> x, std::span<const double> grad) { step(x, grad, params_.learning_rate); }

  [[nodiscard]] std::size_t iteration() const { return t_; }

private:
  AdamParameters params_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

} // namespace lumiparam

#endif // LUMIPARAM_ADAM_HPP
