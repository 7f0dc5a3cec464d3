#pragma once

// Softmax classification heads, cross-entropy losses, adaptive task weighting.

#include <algorithm>
#include <span>

#include "falcon/params.hpp"

namespace falcon {

inline constexpr double kProbClip = 1e-7;

inline Eigen::Vector2d softmax2(const Eigen::Vector2d& z) {
  const double mx = z.maxCoeff();
  Eigen::Vector2d e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Two-way linear layer followed by softmax; no bias.
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(std::size_t in, Rng& rng) : w_(2, static_cast<Eigen::Index>(in)) { xavier_init(w_, rng); }

  std::size_t input_size() const { return static_cast<std::size_t>(w_.value.cols()); }

  Eigen::Vector2d logits(const Eigen::VectorXd& x) const {
    if (x.size() != w_.value.cols()) {
      throw Error("head expects input of size " + std::to_string(w_.value.cols()) + ", got " +
                  std::to_string(x.size()));
    }
    return w_.value * x;
  }

  Eigen::Vector2d probs(const Eigen::VectorXd& x) const { return softmax2(logits(x)); }

  /// Accumulates dL/dW; returns dL/dx.
  Eigen::VectorXd backward(const Eigen::VectorXd& x, const Eigen::Vector2d& d_logits) {
    w_.grad.noalias() += d_logits * x.transpose();
    return w_.value.transpose() * d_logits;
  }

  Param& weight() { return w_; }
  const Param& weight() const { return w_; }

 private:
  Param w_;
};

inline void check_label(int y) {
  if (y != 0 && y != 1) throw Error("label must be 0 or 1, got " + std::to_string(y));
}

/// Binary cross-entropy of a positive-class probability, clipped to [1e-7, 1 - 1e-7].
inline double bce(double p, int y) {
  check_label(y);
  const double q = std::clamp(p, kProbClip, 1.0 - kProbClip);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

/// dBCE/dlogits for a two-way softmax; zero where clipping is active.
inline Eigen::Vector2d bce_logit_grad(const Eigen::Vector2d& probs, int y) {
  check_label(y);
  const double p = probs(1);
  if (p < kProbClip || p > 1.0 - kProbClip) return Eigen::Vector2d::Zero();
  // p = sigmoid(z1 - z0), so dL/dz1 = p - y = -dL/dz0.
  const double g = p - static_cast<double>(y);
  return {-g, g};
}

/// Mean-reduced binary cross-entropy over a batch.
inline double interaction_loss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error("probability and label counts differ");
  if (probs.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += bce(probs[i], labels[i]);
  return total / static_cast<double>(probs.size());
}

inline double trajectory_loss(std::span<const double> probs1, std::span<const int> labels1,
                              std::span<const double> probs2, std::span<const int> labels2) {
  return 0.5 * (interaction_loss(probs1, labels1) + interaction_loss(probs2, labels2));
}

inline constexpr double kMinTaskWeight = 1e-3;

inline double clamp_task_weight(double c) {
  if (std::abs(c) >= kMinTaskWeight) return c;
  return c < 0 ? -kMinTaskWeight : kMinTaskWeight;
}

struct MultitaskLossValue {
  double value = 0;
  double d_inter = 0;  // dL/dL_inter
  double d_tra = 0;    // dL/dL_tra
  double d_c1 = 0;
  double d_c2 = 0;
};

/// L = L_inter / (2 c1^2) + L_tra / (2 c2^2) + log(1 + c1^2) + log(1 + c2^2).
inline MultitaskLossValue multitask_loss(double l_inter, double l_tra, double c1, double c2) {
  c1 = clamp_task_weight(c1);
  c2 = clamp_task_weight(c2);
  MultitaskLossValue r;
  const double c1s = c1 * c1;
  const double c2s = c2 * c2;
  r.value = l_inter / (2.0 * c1s) + l_tra / (2.0 * c2s) + std::log1p(c1s) + std::log1p(c2s);
  r.d_inter = 1.0 / (2.0 * c1s);
  r.d_tra = 1.0 / (2.0 * c2s);
  r.d_c1 = -l_inter / (c1s * c1) + 2.0 * c1 / (1.0 + c1s);
  r.d_c2 = -l_tra / (c2s * c2) + 2.0 * c2 / (1.0 + c2s);
  return r;
}

}  // namespace falcon
