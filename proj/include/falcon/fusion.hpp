#pragma once

// Feature transfer: frozen trajectory extractor, gating, cross-attention, fusion.

#include <functional>

#include "falcon/config.hpp"
#include "falcon/dataset.hpp"
#include "falcon/heads.hpp"

namespace falcon {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

/// h^g = sigmoid(W_gate h) * h (elementwise).
inline Eigen::VectorXd gate_features(const Eigen::VectorXd& h, const Eigen::MatrixXd& w_gate) {
  if (w_gate.rows() != h.size() || w_gate.cols() != h.size()) throw Error("gate matrix must be d x d");
  return sigmoid(w_gate * h).cwiseProduct(h);
}

struct CrossAttention {
  Eigen::VectorXd query;   // Q = W_Q H'_inter
  Eigen::Vector2d scores;  // (Q . h_i^g) / d
  Eigen::Vector2d alpha;
  Eigen::VectorXd attended1;
  Eigen::VectorXd attended2;
};

inline Eigen::Vector2d softmax_pair(const Eigen::Vector2d& s) {
  if (std::isinf(s(0)) || std::isinf(s(1))) {
    if (s(0) > s(1)) return {1.0, 0.0};
    if (s(1) > s(0)) return {0.0, 1.0};
  }
  return softmax2(s);
}

/// Joint mode normalizes the two trajectory scores together. Literal mode
/// applies softmax to each single score, which is identically 1, so the gated
/// vectors pass through unchanged.
inline CrossAttention cross_attend(const Eigen::VectorXd& h_inter, const Eigen::VectorXd& h1_gated,
                                   const Eigen::VectorXd& h2_gated, const Eigen::MatrixXd& w_q,
                                   CrossAttentionMode mode = CrossAttentionMode::Joint) {
  const Eigen::Index d = h1_gated.size();
  if (h2_gated.size() != d || w_q.rows() != d || w_q.cols() != h_inter.size()) {
    throw Error("cross-attention dimension mismatch");
  }
  CrossAttention ca;
  ca.query = w_q * h_inter;
  ca.scores = {ca.query.dot(h1_gated) / static_cast<double>(d), ca.query.dot(h2_gated) / static_cast<double>(d)};
  ca.alpha = mode == CrossAttentionMode::Joint ? softmax_pair(ca.scores) : Eigen::Vector2d(1.0, 1.0);
  ca.attended1 = ca.alpha(0) * h1_gated;
  ca.attended2 = ca.alpha(1) * h2_gated;
  return ca;
}

/// concat(H'_inter, h1, h2) with dimensions 5d, d, d.
inline Eigen::VectorXd fuse(const Eigen::VectorXd& h_inter, const Eigen::VectorXd& h1, const Eigen::VectorXd& h2) {
  if (h1.size() != h2.size() || h_inter.size() != 5 * h1.size()) {
    throw Error("fuse expects inputs of sizes 5d, d, d");
  }
  Eigen::VectorXd out(h_inter.size() + 2 * h1.size());
  out << h_inter, h1, h2;
  return out;
}

struct FusionTrace {
  Eigen::VectorXd inter;
  Eigen::VectorXd tra1;  // frozen extractor features
  Eigen::VectorXd tra2;
  Eigen::VectorXd gate1;
  Eigen::VectorXd gate2;
  Eigen::VectorXd gated1;
  Eigen::VectorXd gated2;
  CrossAttention attention;
  Eigen::VectorXd output;
};

/// Trainable gating (W_gate) and query (W_Q) parameters plus the mode switch.
class FusionLayer {
 public:
  FusionLayer() = default;
  FusionLayer(std::size_t hidden, FusionMode mode, CrossAttentionMode attn, Rng& rng)
      : d_(static_cast<Eigen::Index>(hidden)), mode_(mode), attn_(attn), w_gate_(d_, d_), w_q_(d_, 5 * d_) {
    xavier_init(w_gate_, rng);
    xavier_init(w_q_, rng);
  }

  FusionMode mode() const { return mode_; }

  std::size_t output_size() const {
    return static_cast<std::size_t>(mode_ == FusionMode::Off ? 5 * d_ : 7 * d_);
  }

  FusionTrace forward(const Eigen::VectorXd& inter, const Eigen::VectorXd& tra1, const Eigen::VectorXd& tra2) const {
    FusionTrace tr;
    tr.inter = inter;
    if (mode_ == FusionMode::Off) {
      if (inter.size() != 5 * d_) throw Error("interaction features must be 5d");
      tr.output = inter;
      return tr;
    }
    tr.tra1 = tra1;
    tr.tra2 = tra2;
    if (mode_ == FusionMode::Concat) {
      tr.output = fuse(inter, tra1, tra2);
      return tr;
    }
    tr.gate1 = sigmoid(w_gate_.value * tra1);
    tr.gate2 = sigmoid(w_gate_.value * tra2);
    tr.gated1 = tr.gate1.cwiseProduct(tra1);
    tr.gated2 = tr.gate2.cwiseProduct(tra2);
    tr.attention = cross_attend(inter, tr.gated1, tr.gated2, w_q_.value, attn_);
    tr.output = fuse(inter, tr.attention.attended1, tr.attention.attended2);
    return tr;
  }

  /// Accumulates dW_gate, dW_Q; returns dL/dH'_inter.
  Eigen::VectorXd backward(const FusionTrace& tr, const Eigen::VectorXd& grad) {
    const Eigen::Index n5 = 5 * d_;
    Eigen::VectorXd d_inter = grad.head(n5);
    if (mode_ != FusionMode::Gated) return d_inter;
    const Eigen::VectorXd g1 = grad.segment(n5, d_);
    const Eigen::VectorXd g2 = grad.segment(n5 + d_, d_);
    const auto& ca = tr.attention;
    Eigen::VectorXd d_gated1 = ca.alpha(0) * g1;
    Eigen::VectorXd d_gated2 = ca.alpha(1) * g2;
    if (attn_ == CrossAttentionMode::Joint) {
      const Eigen::Vector2d d_alpha(g1.dot(tr.gated1), g2.dot(tr.gated2));
      const double inner = ca.alpha.dot(d_alpha);
      const Eigen::Vector2d d_score = ca.alpha.cwiseProduct((d_alpha.array() - inner).matrix());
      const double inv_d = 1.0 / static_cast<double>(d_);
      const Eigen::VectorXd d_query = (d_score(0) * tr.gated1 + d_score(1) * tr.gated2) * inv_d;
      d_gated1 += d_score(0) * inv_d * ca.query;
      d_gated2 += d_score(1) * inv_d * ca.query;
      w_q_.grad.noalias() += d_query * tr.inter.transpose();
      d_inter.noalias() += w_q_.value.transpose() * d_query;
    }
    auto gate_back = [&](const Eigen::VectorXd& d_gated, const Eigen::VectorXd& gate, const Eigen::VectorXd& h) {
      const Eigen::VectorXd d_pre =
          d_gated.cwiseProduct(h).cwiseProduct(gate.cwiseProduct((1.0 - gate.array()).matrix()));
      w_gate_.grad.noalias() += d_pre * h.transpose();
    };
    gate_back(d_gated1, tr.gate1, tr.tra1);
    gate_back(d_gated2, tr.gate2, tr.tra2);
    return d_inter;
  }

  Param& gate_weight() { return w_gate_; }
  Param& query_weight() { return w_q_; }

  ParamList params(const std::string& prefix) {
    if (mode_ != FusionMode::Gated) return {};
    return {{prefix + "W_gate", &w_gate_, true}, {prefix + "W_Q", &w_q_, true}};
  }

 private:
  Eigen::Index d_ = 0;
  FusionMode mode_ = FusionMode::Gated;
  CrossAttentionMode attn_ = CrossAttentionMode::Joint;
  Param w_gate_;
  Param w_q_;
};

struct MlpTrace {
  std::vector<Eigen::VectorXd> inputs;  // input of each layer
  Eigen::VectorXd output;
};

/// f_tra = MLP(AR_BERT(s, E)): 4d -> d, then (layers - 1) x (d -> d), tanh between layers.
class TrajectoryExtractor {
 public:
  TrajectoryExtractor() = default;
  TrajectoryExtractor(const BackboneSpec& backbone, std::size_t mlp_layers, AttentionNorm norm, Rng& rng)
      : backbone_(backbone), encoder_(backbone.hidden_size, rng, norm), head_(backbone.hidden_size, rng) {
    const auto d = static_cast<Eigen::Index>(backbone.hidden_size);
    for (std::size_t l = 0; l < mlp_layers; ++l) {
      Param w(d, l == 0 ? 4 * d : d);
      xavier_init(w, rng);
      mlp_w_.push_back(std::move(w));
      mlp_b_.emplace_back(d, 1);
    }
  }

  const BackboneSpec& backbone_spec() const { return backbone_; }
  std::size_t hidden_size() const { return backbone_.hidden_size; }
  std::size_t mlp_layers() const { return mlp_w_.size(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  ArBertEncoder& encoder() { return encoder_; }
  const ArBertEncoder& encoder() const { return encoder_; }
  LinearHead& head() { return head_; }

  MlpTrace mlp_forward(const Eigen::VectorXd& x) const {
    MlpTrace tr;
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l < mlp_w_.size(); ++l) {
      if (l > 0) h = h.array().tanh().matrix();
      tr.inputs.push_back(h);
      h = mlp_w_[l].value * h + mlp_b_[l].value;
    }
    tr.output = std::move(h);
    return tr;
  }

  /// Returns dL/d(encoder output).
  Eigen::VectorXd mlp_backward(const MlpTrace& tr, Eigen::VectorXd grad) {
    for (std::size_t l = mlp_w_.size(); l-- > 0;) {
      mlp_w_[l].grad.noalias() += grad * tr.inputs[l].transpose();
      mlp_b_[l].grad += grad;
      grad = mlp_w_[l].value.transpose() * grad;
      if (l > 0) grad = grad.cwiseProduct((1.0 - tr.inputs[l].array().square()).matrix());
    }
    return grad;
  }

  Eigen::VectorXd features(const PooledInput& in) const {
    if (in.roles.size() != 3) throw Error("trajectory extractor expects (Person, Time, Location)");
    return mlp_forward(encoder_.encode(in)).output;
  }

  /// Parameters of the encoder and MLP (the pretraining head is listed separately).
  ParamList params(const std::string& prefix) {
    ParamList out = encoder_.params(prefix + "enc.");
    for (std::size_t l = 0; l < mlp_w_.size(); ++l) {
      out.push_back({prefix + "mlp." + std::to_string(l) + ".W", &mlp_w_[l], true});
      out.push_back({prefix + "mlp." + std::to_string(l) + ".b", &mlp_b_[l], false});
    }
    return out;
  }

  ParamList head_params(const std::string& prefix) { return {{prefix + "head.W", &head_.weight(), true}}; }

 private:
  BackboneSpec backbone_;
  ArBertEncoder encoder_;
  LinearHead head_;
  std::vector<Param> mlp_w_;
  std::vector<Param> mlp_b_;
  bool frozen_ = false;
};

struct PretrainEpoch {
  std::size_t epoch = 0;
  double loss = 0;
  double accuracy = 0;
};

inline PooledInput trajectory_input(const TrajectoryTriple& t, const EncoderBackbone& backbone) {
  const auto entities = entities_of(t);
  return prepare_input(t.segment, entities, backbone);
}

/// Trains encoder + MLP + head with mean binary cross-entropy on trajectory
/// labels, then freezes the extractor.
inline TrajectoryExtractor pretrain_trajectory_extractor(const std::vector<TrajectoryTriple>& corpus,
                                                         const TrainConfig& config,
                                                         std::vector<PretrainEpoch>* log = nullptr) {
  config.validate();
  if (corpus.empty()) throw Error("trajectory corpus is empty");
  auto backbone = make_backbone(config.backbone);
  Rng rng(config.seed);
  TrajectoryExtractor ex(config.backbone, config.mlp_layers, config.attention_norm, rng);

  std::vector<PooledInput> inputs;
  std::vector<int> labels;
  for (const auto& t : corpus) {
    if (!t.label) throw Error("trajectory corpus record without y_tra label in " + t.segment.segment_id);
    check_label(*t.label);
    inputs.push_back(trajectory_input(t, *backbone));
    labels.push_back(*t.label);
  }

  ParamList params = ex.params("");
  for (auto& p : ex.head_params("")) params.push_back(p);
  AdamW opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const double scale = 1.0 / static_cast<double>(e - b);
      for (auto& p : params) p.param->zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t i = order[k];
        const auto enc = ex.encoder().forward(inputs[i]);
        const auto mlp = ex.mlp_forward(enc.output);
        const Eigen::Vector2d probs = ex.head().probs(mlp.output);
        loss_sum += bce(probs(1), labels[i]);
        correct += static_cast<std::size_t>((probs(1) >= 0.5) == (labels[i] == 1));
        const Eigen::VectorXd d_feat = ex.head().backward(mlp.output, scale * bce_logit_grad(probs, labels[i]));
        ex.encoder().backward(inputs[i], enc, ex.mlp_backward(mlp, d_feat));
      }
      opt.step(params);
      ++steps;
      if (config.max_steps && steps >= config.max_steps) break;
    }
    if (!std::isfinite(loss_sum)) throw Error("trajectory pretraining diverged (non-finite loss)");
    if (log) {
      log->push_back({epoch + 1, loss_sum / static_cast<double>(order.size()),
                      static_cast<double>(correct) / static_cast<double>(order.size())});
    }
    if (config.max_steps && steps >= config.max_steps) break;
  }
  ex.freeze();
  return ex;
}

inline Json extractor_header(const TrajectoryExtractor& ex, const TrainConfig& config) {
  Json h;
  h["kind"] = "trajectory-extractor";
  h["backbone"] = backbone_to_json(ex.backbone_spec());
  h["mlp_layers"] = ex.mlp_layers();
  h["attention_norm"] = ex.encoder().attention_norm() == AttentionNorm::Softmax ? "softmax" : "literal";
  h["config"] = to_json(config);
  h["config_hash"] = config_hash(config);
  return h;
}

inline void save_extractor(const std::string& path, TrajectoryExtractor& ex, const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.header = extractor_header(ex, config);
  export_params(ex.params(""), "", ckpt);
  export_params(ex.head_params(""), "", ckpt);
  save_checkpoint(path, ckpt);
}

/// Rebuilds a frozen extractor from checkpoint tensors stored under `prefix`.
inline TrajectoryExtractor extractor_from_checkpoint(const Checkpoint& ckpt, const Json& header,
                                                     const std::string& prefix) {
  const BackboneSpec spec = backbone_from_json(header.at("backbone"));
  const AttentionNorm norm =
      header.value("attention_norm", std::string("softmax")) == "literal" ? AttentionNorm::Literal : AttentionNorm::Softmax;
  Rng rng(0);
  TrajectoryExtractor ex(spec, header.at("mlp_layers").get<std::size_t>(), norm, rng);
  import_params(ex.params(""), prefix, ckpt);
  import_params(ex.head_params(""), prefix, ckpt);
  ex.freeze();
  return ex;
}

inline TrajectoryExtractor load_extractor(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.header.value("kind", std::string()) != "trajectory-extractor") {
    throw Error(path + " is not a trajectory-extractor checkpoint");
  }
  return extractor_from_checkpoint(ckpt, ckpt.header, "");
}

}  // namespace falcon
