#pragma once

// The interaction classifier: shared AR-BERT encoder, feature transfer from a
// frozen trajectory extractor, interaction and trajectory heads, adaptive
// task weights. Training, prediction and checkpoints live here too.

#include <numeric>
#include <optional>

#include "falcon/fusion.hpp"
#include "falcon/metrics.hpp"

namespace falcon {

/// Everything a candidate contributes to a forward pass. Backbone outputs and
/// frozen-extractor features are constant, so they are computed once.
struct ExampleInputs {
  PooledInput inter;
  PooledInput tra1;
  PooledInput tra2;
  Eigen::VectorXd frozen1;
  Eigen::VectorXd frozen2;
};

struct ForwardResult {
  EncoderTrace inter;
  FusionTrace fusion;
  Eigen::Vector2d inter_probs;
  EncoderTrace tra1;
  EncoderTrace tra2;
  Eigen::Vector2d tra1_probs;
  Eigen::Vector2d tra2_probs;
};

class FalconModel {
 public:
  FalconModel(const TrainConfig& config, std::optional<TrajectoryExtractor> extractor)
      : config_(config), backbone_(make_backbone(config.backbone)) {
    config_.validate();
    const std::size_t d = config.backbone.hidden_size;
    if (config.feature_transfer()) {
      if (!extractor) throw Error("feature transfer requires a trajectory extractor");
      if (extractor->hidden_size() != d) {
        throw Error("trajectory extractor hidden size " + std::to_string(extractor->hidden_size()) +
                    " does not match model hidden size " + std::to_string(d));
      }
      extractor->freeze();
      extractor_ = std::move(extractor);
      extractor_backbone_ = extractor_->backbone_spec() == config.backbone ? backbone_
                                                                             : make_backbone(extractor_->backbone_spec());
    }
    Rng rng(config.seed);
    encoder_ = ArBertEncoder(d, rng, config.attention_norm);
    fusion_ = FusionLayer(d, config.fusion, config.cross_attention, rng);
    inter_head_ = LinearHead(fusion_.output_size(), rng);
    tra_head_ = LinearHead(4 * d, rng);
    c1_ = Param(1, 1);
    c2_ = Param(1, 1);
    c1_.value(0, 0) = 1.0;
    c2_.value(0, 0) = 1.0;
  }

  const TrainConfig& config() const { return config_; }
  const EncoderBackbone& backbone() const { return *backbone_; }
  std::size_t hidden_size() const { return config_.backbone.hidden_size; }
  const std::optional<TrajectoryExtractor>& extractor() const { return extractor_; }
  std::optional<TrajectoryExtractor>& extractor() { return extractor_; }
  ArBertEncoder& encoder() { return encoder_; }
  FusionLayer& fusion() { return fusion_; }
  LinearHead& interaction_head() { return inter_head_; }
  LinearHead& trajectory_head() { return tra_head_; }
  double c1() const { return c1_.value(0, 0); }
  double c2() const { return c2_.value(0, 0); }

  /// Throws ContextOverflow when the candidate does not fit the backbone budget.
  ExampleInputs prepare(const CandidateQuadruple& q, bool with_auxiliary) const {
    ExampleInputs in;
    const auto entities = q.entities();
    in.inter = prepare_input(q.segment, entities, *backbone_);
    if (!with_auxiliary && !extractor_) return in;
    LabeledExample e;
    e.candidate = q;
    const auto [t1, t2] = decompose(e);
    if (with_auxiliary) {
      in.tra1 = trajectory_input(t1, *backbone_);
      in.tra2 = trajectory_input(t2, *backbone_);
    }
    if (extractor_) {
      in.frozen1 = extractor_->features(trajectory_input(t1, *extractor_backbone_));
      in.frozen2 = extractor_->features(trajectory_input(t2, *extractor_backbone_));
    }
    return in;
  }

  ForwardResult forward(const ExampleInputs& in, bool with_auxiliary) const {
    ForwardResult r;
    r.inter = encoder_.forward(in.inter);
    r.fusion = fusion_.forward(r.inter.output, in.frozen1, in.frozen2);
    r.inter_probs = inter_head_.probs(r.fusion.output);
    if (with_auxiliary) {
      r.tra1 = encoder_.forward(in.tra1);
      r.tra2 = encoder_.forward(in.tra2);
      r.tra1_probs = tra_head_.probs(r.tra1.output);
      r.tra2_probs = tra_head_.probs(r.tra2.output);
    }
    return r;
  }

  /// Backpropagates head-logit gradients through every trainable component.
  void backward(const ExampleInputs& in, const ForwardResult& r, const Eigen::Vector2d& d_inter_logits,
                const std::optional<std::pair<Eigen::Vector2d, Eigen::Vector2d>>& d_tra_logits) {
    const Eigen::VectorXd d_fusion = inter_head_.backward(r.fusion.output, d_inter_logits);
    encoder_.backward(in.inter, r.inter, fusion_.backward(r.fusion, d_fusion));
    if (d_tra_logits) {
      encoder_.backward(in.tra1, r.tra1, tra_head_.backward(r.tra1.output, d_tra_logits->first));
      encoder_.backward(in.tra2, r.tra2, tra_head_.backward(r.tra2.output, d_tra_logits->second));
    }
  }

  double score(const CandidateQuadruple& q) const { return forward(prepare(q, false), false).inter_probs(1); }

  /// Every model-owned parameter (the frozen extractor excluded).
  ParamList all_params() {
    ParamList out = encoder_.params("enc.");
    for (auto& p : fusion_.params("fusion.")) out.push_back(p);
    out.push_back({"head.inter.W", &inter_head_.weight(), true});
    out.push_back({"head.tra.W", &tra_head_.weight(), true});
    out.push_back({"task.c1", &c1_, false});
    out.push_back({"task.c2", &c2_, false});
    return out;
  }

  /// Parameters updated under the current ablation flags.
  ParamList trainable_params() {
    ParamList out = encoder_.params("enc.");
    for (auto& p : fusion_.params("fusion.")) out.push_back(p);
    out.push_back({"head.inter.W", &inter_head_.weight(), true});
    if (config_.multitask) {
      out.push_back({"head.tra.W", &tra_head_.weight(), true});
      if (config_.adaptive_weighting) {
        out.push_back({"task.c1", &c1_, false});
        out.push_back({"task.c2", &c2_, false});
      }
    }
    return out;
  }

  void clamp_task_weights() {
    c1_.value(0, 0) = clamp_task_weight(c1_.value(0, 0));
    c2_.value(0, 0) = clamp_task_weight(c2_.value(0, 0));
  }

  Param& c1_param() { return c1_; }
  Param& c2_param() { return c2_; }

 private:
  TrainConfig config_;
  std::shared_ptr<const EncoderBackbone> backbone_;
  std::shared_ptr<const EncoderBackbone> extractor_backbone_;
  std::optional<TrajectoryExtractor> extractor_;
  ArBertEncoder encoder_;
  FusionLayer fusion_;
  LinearHead inter_head_;
  LinearHead tra_head_;
  Param c1_;
  Param c2_;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string objective;  // which terms were optimized
  double loss = 0;
  double l_inter = 0;
  std::optional<double> l_tra;
  double c1 = 1;
  double c2 = 1;
  double train_accuracy = 0;
  std::optional<MetricReport> val;
  std::size_t steps = 0;
};

inline Json to_json(const EpochLog& e) {
  Json j;
  j["epoch"] = e.epoch;
  j["objective"] = e.objective;
  j["loss"] = e.loss;
  j["l_inter"] = e.l_inter;
  j["l_tra"] = e.l_tra ? Json(*e.l_tra) : Json(nullptr);
  j["c1"] = e.c1;
  j["c2"] = e.c2;
  j["train_acc"] = e.train_accuracy;
  j["val"] = e.val ? to_json(*e.val) : Json(nullptr);
  j["steps"] = e.steps;
  return j;
}

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  FalconModel model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

inline std::string objective_name(const TrainConfig& c) {
  if (!c.multitask) return "L_inter";
  if (!c.adaptive_weighting) return "L_inter + L_tra";
  return "L_inter/(2c1^2) + L_tra/(2c2^2) + log(1+c1^2) + log(1+c2^2)";
}

struct Prediction {
  double score = 0;
  int label = 0;
  bool skipped = false;
  std::string reason;
};

/// Scores each candidate; candidates that cannot be encoded are marked skipped.
inline std::vector<Prediction> predict(const FalconModel& model, const std::vector<CandidateQuadruple>& candidates,
                                       double threshold = 0.5) {
  std::vector<Prediction> out;
  out.reserve(candidates.size());
  for (const auto& q : candidates) {
    Prediction p;
    try {
      p.score = model.score(q);
      p.label = p.score >= threshold ? 1 : 0;
    } catch (const Error& e) {
      p.skipped = true;
      p.reason = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline MetricReport evaluate(const FalconModel& model, const std::vector<LabeledExample>& data,
                             const std::string& dataset_id = "") {
  std::vector<CandidateQuadruple> cands;
  std::vector<int> gold;
  for (const auto& e : data) {
    cands.push_back(e.candidate);
    gold.push_back(e.y_inter);
  }
  const auto preds = predict(model, cands, model.config().threshold);
  std::vector<int> labels;
  for (const auto& p : preds) labels.push_back(p.skipped ? 0 : p.label);
  MetricReport r = compute_metrics(labels, gold);
  r.dataset_id = dataset_id;
  r.config_hash = config_hash(model.config());
  return r;
}

/// Joint training on the train split with per-epoch validation; returns the
/// model from the epoch with the best validation F1 (the last epoch when there
/// is no validation split).
inline TrainResult train(const std::vector<LabeledExample>& dataset, const TrainConfig& config,
                         std::optional<TrajectoryExtractor> extractor) {
  config.validate();
  FalconModel model(config, std::move(extractor));
  std::vector<const LabeledExample*> train_set;
  std::vector<LabeledExample> val_set;
  for (const auto& e : dataset) {
    if (e.split == Split::Train) train_set.push_back(&e);
    if (e.split == Split::Val) val_set.push_back(e);
  }
  if (train_set.empty()) throw Error("dataset has no train split");

  std::vector<ExampleInputs> inputs;
  inputs.reserve(train_set.size());
  for (const auto* e : train_set) inputs.push_back(model.prepare(e->candidate, config.multitask));

  TrainResult result{model, {}, 0};
  double best_f1 = -1;
  std::size_t since_best = 0;
  Rng rng(derive_seed(config.seed, 1));
  AdamW opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t steps = 0;
  bool step_cap = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !step_cap; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0, inter_sum = 0, tra_sum = 0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const double inv_j = 1.0 / static_cast<double>(end - b);
      std::vector<ForwardResult> fwd;
      double l_inter = 0, l_tra1 = 0, l_tra2 = 0;
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        fwd.push_back(model.forward(inputs[i], config.multitask));
        const auto& r = fwd.back();
        const auto* e = train_set[i];
        l_inter += bce(r.inter_probs(1), e->y_inter) * inv_j;
        correct += static_cast<std::size_t>((r.inter_probs(1) >= config.threshold) == (e->y_inter == 1));
        if (config.multitask) {
          l_tra1 += bce(r.tra1_probs(1), e->y_tra1) * inv_j;
          l_tra2 += bce(r.tra2_probs(1), e->y_tra2) * inv_j;
        }
      }
      const double l_tra = 0.5 * (l_tra1 + l_tra2);
      double loss = l_inter, w_inter = 1.0, w_tra = 0.0;
      MultitaskLossValue mt;
      if (config.multitask && config.adaptive_weighting) {
        mt = multitask_loss(l_inter, l_tra, model.c1(), model.c2());
        loss = mt.value;
        w_inter = mt.d_inter;
        w_tra = mt.d_tra;
      } else if (config.multitask) {
        loss = l_inter + l_tra;
        w_tra = 1.0;
      }
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(steps + 1) + ": L=" + std::to_string(loss) +
                               " L_inter=" + std::to_string(l_inter) + " L_tra=" + std::to_string(l_tra) +
                               " c1=" + std::to_string(model.c1()) + " c2=" + std::to_string(model.c2()));
      }

      ParamList params = model.trainable_params();
      for (auto& p : params) p.param->zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        const auto* e = train_set[i];
        const auto& r = fwd[k - b];
        const Eigen::Vector2d d_inter = (w_inter * inv_j) * bce_logit_grad(r.inter_probs, e->y_inter);
        std::optional<std::pair<Eigen::Vector2d, Eigen::Vector2d>> d_tra;
        if (config.multitask) {
          // L_tra averages the two branches.
          const double s = 0.5 * w_tra * inv_j;
          d_tra = std::make_pair(Eigen::Vector2d(s * bce_logit_grad(r.tra1_probs, e->y_tra1)),
                                 Eigen::Vector2d(s * bce_logit_grad(r.tra2_probs, e->y_tra2)));
        }
        model.backward(inputs[i], r, d_inter, d_tra);
      }
      if (config.multitask && config.adaptive_weighting) {
        model.c1_param().grad(0, 0) = mt.d_c1;
        model.c2_param().grad(0, 0) = mt.d_c2;
      }
      opt.step(params);
      model.clamp_task_weights();

      loss_sum += loss;
      inter_sum += l_inter;
      tra_sum += l_tra;
      ++batches;
      ++steps;
      if (config.max_steps && steps >= config.max_steps) {
        step_cap = true;
        break;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.objective = objective_name(config);
    log.loss = loss_sum / static_cast<double>(batches);
    log.l_inter = inter_sum / static_cast<double>(batches);
    if (config.multitask) log.l_tra = tra_sum / static_cast<double>(batches);
    log.c1 = model.c1();
    log.c2 = model.c2();
    const std::size_t seen = std::min(order.size(), batches * config.batch_size);
    log.train_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    log.steps = steps;
    if (!val_set.empty()) log.val = evaluate(model, val_set, "val");
    result.log.push_back(log);

    if (val_set.empty()) {
      result.model = model;
      result.best_epoch = epoch;
      continue;
    }
    // Ties keep the later epoch without resetting patience.
    const bool improved = log.val->f1 > best_f1;
    if (improved || log.val->f1 == best_f1) {
      best_f1 = log.val->f1;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (improved) {
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      break;
    }
  }
  return result;
}

inline void save_model(const std::string& path, FalconModel& model, const std::vector<EpochLog>& log = {},
                       std::size_t best_epoch = 0) {
  Checkpoint ckpt;
  ckpt.header["kind"] = "model";
  ckpt.header["config"] = to_json(model.config());
  ckpt.header["config_hash"] = config_hash(model.config());
  ckpt.header["backbone"] = backbone_to_json(model.config().backbone);
  Json metrics = Json::array();
  for (const auto& e : log) metrics.push_back(to_json(e));
  ckpt.header["metrics"] = std::move(metrics);
  ckpt.header["best_epoch"] = best_epoch;
  export_params(model.all_params(), "", ckpt);
  if (auto& ex = model.extractor()) {
    Json h = extractor_header(*ex, model.config());
    h.erase("config");
    h.erase("config_hash");
    ckpt.header["extractor"] = std::move(h);
    export_params(ex->params(""), "extractor.", ckpt);
    export_params(ex->head_params(""), "extractor.", ckpt);
  }
  save_checkpoint(path, ckpt);
}

inline FalconModel load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.header.value("kind", std::string()) != "model") throw Error(path + " is not a model checkpoint");
  const TrainConfig config = config_from_json(ckpt.header.at("config"));
  std::optional<TrajectoryExtractor> ex;
  if (ckpt.header.contains("extractor")) ex = extractor_from_checkpoint(ckpt, ckpt.header["extractor"], "extractor.");
  FalconModel model(config, std::move(ex));
  import_params(model.all_params(), "", ckpt);
  return model;
}

/// Fails when a checkpoint was trained against a different backbone than requested.
inline void check_backbone(const FalconModel& model, const BackboneSpec& expected) {
  const auto& have = model.config().backbone;
  if (have.name != expected.name || have.hidden_size != expected.hidden_size ||
      have.max_tokens != expected.max_tokens || have.seed != expected.seed) {
    throw Error("checkpoint backbone (" + have.name + ", d=" + std::to_string(have.hidden_size) +
                ") does not match requested backbone (" + expected.name + ", d=" +
                std::to_string(expected.hidden_size) + ")");
  }
}

}  // namespace falcon
