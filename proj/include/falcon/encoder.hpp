#pragma once

// AR-BERT encoder: entity markers, per-occurrence mean pooling, attention over
// occurrences, per-role projection, concatenation.

#include <array>

#include "falcon/backbone.hpp"
#include "falcon/params.hpp"
#include "falcon/types.hpp"

namespace falcon {

inline char marker_for(Role r) {
  switch (r) {
    case Role::Person1: return '#';
    case Role::Person2: return '$';
    case Role::Person: return '#';
    case Role::Time: return '*';
    case Role::Location: return '&';
  }
  return '#';
}

/// Inclusive token range [first, last].
struct TokenSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct MarkedInput {
  std::string marked_text;
  std::vector<Token> tokens;  // tokens[0] is [CLS]
  std::vector<std::vector<TokenSpan>> entity_spans;
  std::size_t cls_position = 0;
};

class ContextOverflow : public Error {
 public:
  using Error::Error;
};

/// Wraps every occurrence of every entity in its role marker, tokenizes the
/// marked text and records each occurrence's token span (markers excluded).
/// Sequences longer than the backbone budget are cut to a window centred on
/// the marked region.
inline MarkedInput insert_markers(const TextSegment& segment, std::span<const EntityMention> entities,
                                  const EncoderBackbone& backbone) {
  struct Occ {
    Span span;
    std::size_t entity;
    std::size_t index;
  };
  std::vector<Occ> occs;
  std::vector<std::size_t> counts(entities.size(), 0);
  for (std::size_t e = 0; e < entities.size(); ++e) {
    if (entities[e].occurrences.empty()) throw Error("entity without occurrences");
    for (const Span& s : entities[e].occurrences) {
      if (s.start >= s.end || s.end > segment.text.size()) throw Error("occurrence span out of segment bounds");
      occs.push_back({s, e, counts[e]++});
    }
  }
  std::sort(occs.begin(), occs.end(), [](const Occ& a, const Occ& b) { return a.span < b.span; });
  for (std::size_t i = 1; i < occs.size(); ++i) {
    if (occs[i - 1].span.overlaps(occs[i].span)) throw Error("overlapping entity occurrence spans");
  }

  MarkedInput out;
  std::vector<std::vector<Span>> inner(entities.size());
  for (std::size_t e = 0; e < entities.size(); ++e) inner[e].resize(counts[e]);
  std::size_t cursor = 0;
  for (const Occ& o : occs) {
    out.marked_text.append(segment.text, cursor, o.span.start - cursor);
    const char m = marker_for(entities[o.entity].role);
    out.marked_text.push_back(m);
    const std::size_t begin = out.marked_text.size();
    out.marked_text.append(segment.text, o.span.start, o.span.end - o.span.start);
    inner[o.entity][o.index] = {begin, out.marked_text.size()};
    out.marked_text.push_back(m);
    cursor = o.span.end;
  }
  out.marked_text.append(segment.text, cursor, std::string::npos);

  std::vector<Token> words = backbone.tokenize(out.marked_text);
  out.entity_spans.resize(entities.size());
  std::size_t lo_tok = words.size();
  std::size_t hi_tok = 0;
  for (std::size_t e = 0; e < entities.size(); ++e) {
    for (const Span& r : inner[e]) {
      std::optional<std::size_t> first;
      std::size_t last = 0;
      for (std::size_t t = 0; t < words.size(); ++t) {
        if (words[t].start >= r.start && words[t].end <= r.end) {
          if (!first) first = t;
          last = t;
        }
      }
      if (!first) throw Error("entity occurrence produced no tokens");
      // Markers sit immediately outside the occurrence.
      lo_tok = std::min(lo_tok, *first > 0 ? *first - 1 : 0);
      hi_tok = std::max(hi_tok, std::min(last + 1, words.size() - 1));
      out.entity_spans[e].push_back({*first, last});
    }
  }

  const std::size_t budget = backbone.max_tokens() - 1;  // one slot for [CLS]
  std::size_t offset = 0;
  if (words.size() > budget) {
    const std::size_t needed = hi_tok - lo_tok + 1;
    if (needed > budget) {
      throw ContextOverflow("context overflow: marked occurrences span " + std::to_string(needed) +
                            " tokens, budget is " + std::to_string(budget));
    }
    const std::size_t centre = (lo_tok + hi_tok) / 2;
    std::size_t start = centre > budget / 2 ? centre - budget / 2 : 0;
    start = std::min(start, words.size() - budget);
    start = std::min(start, lo_tok);
    if (start + budget <= hi_tok) start = hi_tok + 1 - budget;
    offset = start;
    words = std::vector<Token>(words.begin() + static_cast<std::ptrdiff_t>(start),
                               words.begin() + static_cast<std::ptrdiff_t>(start + budget));
  }
  out.tokens.reserve(words.size() + 1);
  out.tokens.push_back({std::string(kClsToken), 0, 0});
  for (auto& w : words) out.tokens.push_back(std::move(w));
  for (auto& spans : out.entity_spans) {
    for (auto& s : spans) {
      s.first = s.first - offset + 1;
      s.last = s.last - offset + 1;
    }
  }
  return out;
}

/// Mean of hidden rows first..last.
inline Eigen::VectorXd pool_occurrence(const Eigen::MatrixXd& hidden, TokenSpan span) {
  if (span.first > span.last || span.last >= static_cast<std::size_t>(hidden.rows())) {
    throw Error("pooling span out of range");
  }
  const auto first = static_cast<Eigen::Index>(span.first);
  const auto len = static_cast<Eigen::Index>(span.last - span.first + 1);
  return hidden.middleRows(first, len).colwise().mean().transpose();
}

enum class AttentionNorm { Softmax, Literal };

struct EntityFeature {
  Eigen::VectorXd scores;   // w_k = tanh(a . v_k + b)
  Eigen::VectorXd weights;  // delta_k
  Eigen::VectorXd aggregated;
};

/// Scalar importance per occurrence, normalized into weights, weighted sum.
/// Literal normalization divides by the raw score sum and fails when it vanishes.
inline EntityFeature aggregate_occurrences(std::span<const Eigen::VectorXd> occ, const Eigen::VectorXd& attn_w,
                                           double attn_b, AttentionNorm norm = AttentionNorm::Softmax) {
  if (occ.empty()) throw Error("cannot aggregate an empty occurrence list");
  const auto k = static_cast<Eigen::Index>(occ.size());
  EntityFeature f;
  f.scores.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) f.scores(i) = std::tanh(attn_w.dot(occ[static_cast<std::size_t>(i)]) + attn_b);
  if (norm == AttentionNorm::Softmax) {
    const double mx = f.scores.maxCoeff();
    f.weights = (f.scores.array() - mx).exp().matrix();
    f.weights /= f.weights.sum();
  } else {
    const double s = f.scores.sum();
    if (std::abs(s) < 1e-12) throw Error("literal attention normalization undefined: scores sum to zero");
    f.weights = f.scores / s;
  }
  f.aggregated = Eigen::VectorXd::Zero(occ.front().size());
  for (Eigen::Index i = 0; i < k; ++i) f.aggregated += f.weights(i) * occ[static_cast<std::size_t>(i)];
  return f;
}

/// Accumulates dL/dattn_w and dL/dattn_b given dL/d(aggregated).
inline void aggregate_backward(const EntityFeature& f, std::span<const Eigen::VectorXd> occ,
                               const Eigen::VectorXd& grad_out, AttentionNorm norm, Eigen::VectorXd& grad_w,
                               double& grad_b) {
  const auto k = f.scores.size();
  Eigen::VectorXd d_delta(k);
  for (Eigen::Index i = 0; i < k; ++i) d_delta(i) = grad_out.dot(occ[static_cast<std::size_t>(i)]);
  Eigen::VectorXd d_score(k);
  if (norm == AttentionNorm::Softmax) {
    const double inner = f.weights.dot(d_delta);
    d_score = f.weights.cwiseProduct((d_delta.array() - inner).matrix());
  } else {
    const double s = f.scores.sum();
    const double inner = f.weights.dot(d_delta);
    d_score = ((d_delta.array() - inner) / s).matrix();
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const double d_pre = d_score(i) * (1.0 - f.scores(i) * f.scores(i));
    grad_w += d_pre * occ[static_cast<std::size_t>(i)];
    grad_b += d_pre;
  }
}

/// Backbone output reduced to what the trainable encoder consumes: the [CLS]
/// vector and pooled occurrence vectors per entity. Backbones are frozen, so
/// this can be computed once per input.
struct PooledInput {
  Eigen::VectorXd cls;
  std::vector<Role> roles;
  std::vector<std::vector<Eigen::VectorXd>> occurrences;
};

inline PooledInput prepare_input(const TextSegment& segment, std::span<const EntityMention> entities,
                                 const EncoderBackbone& backbone) {
  const MarkedInput marked = insert_markers(segment, entities, backbone);
  const Eigen::MatrixXd hidden = backbone.forward(marked.tokens);
  PooledInput in;
  in.cls = hidden.row(static_cast<Eigen::Index>(marked.cls_position)).transpose();
  for (std::size_t e = 0; e < entities.size(); ++e) {
    in.roles.push_back(entities[e].role);
    std::vector<Eigen::VectorXd> vs;
    for (const TokenSpan& s : marked.entity_spans[e]) vs.push_back(pool_occurrence(hidden, s));
    in.occurrences.push_back(std::move(vs));
  }
  return in;
}

// Projection slots: [CLS] then one per role.
inline constexpr std::size_t kProjectionSlots = 6;

inline std::size_t projection_slot(Role r) { return static_cast<std::size_t>(r) + 1; }

inline std::string_view projection_name(std::size_t slot) {
  static constexpr std::array<std::string_view, kProjectionSlots> kNames{"cls",    "person1", "person2",
                                                                         "person", "time",    "location"};
  return kNames[slot];
}

struct EncoderTrace {
  Eigen::VectorXd output;
  std::vector<Eigen::VectorXd> activated;  // tanh(H) per slot, CLS first
  std::vector<EntityFeature> entities;
};

/// Trainable part of AR-BERT. Each role owns its projection (W_i, b_i); the
/// occurrence attention (W_attn, b_attn) is shared across entities.
class ArBertEncoder {
 public:
  ArBertEncoder() = default;

  ArBertEncoder(std::size_t hidden, Rng& rng, AttentionNorm norm = AttentionNorm::Softmax)
      : d_(static_cast<Eigen::Index>(hidden)), norm_(norm), attn_w_(1, d_), attn_b_(1, 1) {
    xavier_init(attn_w_, rng);
    for (auto& p : proj_w_) {
      p = Param(d_, d_);
      xavier_init(p, rng);
    }
    for (auto& b : proj_b_) b = Param(d_, 1);
  }

  std::size_t hidden_size() const { return static_cast<std::size_t>(d_); }
  AttentionNorm attention_norm() const { return norm_; }
  void set_attention_norm(AttentionNorm n) { norm_ = n; }

  Param& attention_weight() { return attn_w_; }
  Param& attention_bias() { return attn_b_; }
  Param& projection_weight(std::size_t slot) { return proj_w_.at(slot); }
  Param& projection_bias(std::size_t slot) { return proj_b_.at(slot); }

  EncoderTrace forward(const PooledInput& in) const {
    if (in.cls.size() != d_) throw Error("encoder input dimension does not match hidden size");
    EncoderTrace tr;
    const auto n = static_cast<Eigen::Index>(in.roles.size());
    tr.output.resize((n + 1) * d_);
    auto project = [&](std::size_t slot, const Eigen::VectorXd& h, Eigen::Index at) {
      Eigen::VectorXd act = h.array().tanh().matrix();
      tr.output.segment(at * d_, d_) = proj_w_[slot].value * act + proj_b_[slot].value;
      tr.activated.push_back(std::move(act));
    };
    project(0, in.cls, 0);
    const Eigen::VectorXd a = attn_w_.value.row(0).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& occ = in.occurrences[static_cast<std::size_t>(i)];
      tr.entities.push_back(aggregate_occurrences(occ, a, attn_b_.value(0, 0), norm_));
      project(projection_slot(in.roles[static_cast<std::size_t>(i)]), tr.entities.back().aggregated, i + 1);
    }
    return tr;
  }

  Eigen::VectorXd encode(const PooledInput& in) const { return forward(in).output; }

  /// Accumulates parameter gradients given dL/d(output).
  void backward(const PooledInput& in, const EncoderTrace& tr, const Eigen::VectorXd& grad) {
    const auto n = static_cast<Eigen::Index>(in.roles.size());
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(d_);
    double gb = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i) {
      const std::size_t slot = i == 0 ? 0 : projection_slot(in.roles[static_cast<std::size_t>(i - 1)]);
      const auto g = grad.segment(i * d_, d_);
      const auto& act = tr.activated[static_cast<std::size_t>(i)];
      proj_w_[slot].grad.noalias() += g * act.transpose();
      proj_b_[slot].grad += g;
      if (i == 0) continue;  // backbone is frozen
      const Eigen::VectorXd d_h =
          (proj_w_[slot].value.transpose() * g).cwiseProduct((1.0 - act.array().square()).matrix());
      aggregate_backward(tr.entities[static_cast<std::size_t>(i - 1)], in.occurrences[static_cast<std::size_t>(i - 1)],
                         d_h, norm_, gw, gb);
    }
    attn_w_.grad.row(0) += gw.transpose();
    attn_b_.grad(0, 0) += gb;
  }

  ParamList params(const std::string& prefix) {
    ParamList out{{prefix + "attn.w", &attn_w_, true}, {prefix + "attn.b", &attn_b_, false}};
    for (std::size_t s = 0; s < kProjectionSlots; ++s) {
      out.push_back({prefix + "proj." + std::string(projection_name(s)) + ".W", &proj_w_[s], true});
      out.push_back({prefix + "proj." + std::string(projection_name(s)) + ".b", &proj_b_[s], false});
    }
    return out;
  }

 private:
  Eigen::Index d_ = 0;
  AttentionNorm norm_ = AttentionNorm::Softmax;
  Param attn_w_;
  Param attn_b_;
  std::array<Param, kProjectionSlots> proj_w_;
  std::array<Param, kProjectionSlots> proj_b_;
};

/// Full AR-BERT pass for an interaction (4 entities) or trajectory (3 entities) input.
inline Eigen::VectorXd encode(const ArBertEncoder& encoder, const EncoderBackbone& backbone,
                              const TextSegment& segment, std::span<const EntityMention> entities) {
  if (entities.size() != 3 && entities.size() != 4) throw Error("encode expects 3 or 4 entities");
  if (backbone.hidden_size() != encoder.hidden_size()) throw Error("backbone and encoder hidden sizes differ");
  return encoder.encode(prepare_input(segment, entities, backbone));
}

}  // namespace falcon
