#pragma once

// Token encoder backbones. Pretrained transformers plug in behind
// EncoderBackbone; the stubs here need no weights.

#include <Eigen/Dense>
#include <memory>
#include <span>

#include "falcon/common.hpp"

namespace falcon {

struct Token {
  std::string text;
  std::size_t start = 0;  // character offsets into the tokenized text
  std::size_t end = 0;
};

inline constexpr std::string_view kClsToken = "[CLS]";

class EncoderBackbone {
 public:
  virtual ~EncoderBackbone() = default;

  virtual std::string name() const = 0;
  virtual std::size_t hidden_size() const = 0;
  // Upper bound on the sequence length passed to forward(), [CLS] included.
  virtual std::size_t max_tokens() const = 0;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
  // One hidden row per token; tokens[0] is the [CLS] token.
  virtual Eigen::MatrixXd forward(std::span<const Token> tokens) const = 0;
};

/// Word pieces are runs of alphanumeric (or non-ASCII) bytes; every other
/// printable character is a token on its own.
inline std::vector<Token> simple_tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word(c)) {
      while (j < text.size() && is_word(static_cast<unsigned char>(text[j]))) ++j;
    }
    out.push_back({std::string(text.substr(i, j - i)), i, j});
    i = j;
  }
  return out;
}

/// Row t, column j = ((t + 1) * (j + 2) mod 7) / 7 - 0.5. Text-independent;
/// used where hand-computed expected values are needed.
class PositionStubBackbone final : public EncoderBackbone {
 public:
  PositionStubBackbone(std::size_t hidden, std::size_t max_tokens) : hidden_(hidden), max_tokens_(max_tokens) {}

  std::string name() const override { return "position-stub"; }
  std::size_t hidden_size() const override { return hidden_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  std::vector<Token> tokenize(std::string_view text) const override { return simple_tokenize(text); }

  static double value(std::size_t row, std::size_t col) {
    return static_cast<double>(((row + 1) * (col + 2)) % 7) / 7.0 - 0.5;
  }

  Eigen::MatrixXd forward(std::span<const Token> tokens) const override {
    Eigen::MatrixXd h(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(hidden_));
    for (Eigen::Index t = 0; t < h.rows(); ++t) {
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        h(t, j) = value(static_cast<std::size_t>(t), static_cast<std::size_t>(j));
      }
    }
    return h;
  }

 private:
  std::size_t hidden_;
  std::size_t max_tokens_;
};

/// "deterministic-stub": each lower-cased token hashes to a fixed vector in
/// [-1, 1]^d. A token's hidden state adds half of each neighbour and
/// kContextWeight times its sentence sum scaled by 1/sqrt(length); [CLS] is
/// the mean over all tokens.
class HashedContextBackbone final : public EncoderBackbone {
 public:
  HashedContextBackbone(std::size_t hidden, std::size_t max_tokens, std::uint64_t seed = 0)
      : hidden_(hidden), max_tokens_(max_tokens), seed_(seed) {}

  static constexpr double kContextWeight = 4.0;

  std::string name() const override { return "deterministic-stub"; }
  std::size_t hidden_size() const override { return hidden_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  std::vector<Token> tokenize(std::string_view text) const override { return simple_tokenize(text); }

  Eigen::VectorXd embed(std::string_view token) const {
    std::string lower(token);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::uint64_t state = fnv1a64(lower) ^ seed_;
    Eigen::VectorXd v(static_cast<Eigen::Index>(hidden_));
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      v(j) = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
    }
    return v;
  }

  Eigen::MatrixXd forward(std::span<const Token> tokens) const override {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    const auto d = static_cast<Eigen::Index>(hidden_);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, d);
    if (n == 0) return h;
    Eigen::MatrixXd e(n, d);
    for (Eigen::Index t = 0; t < n; ++t) e.row(t) = embed(tokens[static_cast<std::size_t>(t)].text).transpose();

    // Sentence ids over word tokens (index 0 is [CLS]).
    std::vector<Eigen::Index> sentence(static_cast<std::size_t>(n), 0);
    Eigen::Index sid = 0;
    for (Eigen::Index t = 1; t < n; ++t) {
      sentence[static_cast<std::size_t>(t)] = sid;
      const auto& text = tokens[static_cast<std::size_t>(t)].text;
      if (text == "." || text == "!" || text == "?") ++sid;
    }
    Eigen::MatrixXd sentence_sum = Eigen::MatrixXd::Zero(sid + 1, d);
    Eigen::VectorXd sentence_len = Eigen::VectorXd::Zero(sid + 1);
    for (Eigen::Index t = 1; t < n; ++t) {
      sentence_sum.row(sentence[static_cast<std::size_t>(t)]) += e.row(t);
      sentence_len(sentence[static_cast<std::size_t>(t)]) += 1.0;
    }
    for (Eigen::Index t = 1; t < n; ++t) {
      h.row(t) = e.row(t);
      if (t > 1) h.row(t) += 0.5 * e.row(t - 1);
      if (t + 1 < n) h.row(t) += 0.5 * e.row(t + 1);
      const Eigen::Index s = sentence[static_cast<std::size_t>(t)];
      h.row(t) += kContextWeight * sentence_sum.row(s) / std::sqrt(sentence_len(s));
    }
    if (n > 1) h.row(0) = e.bottomRows(n - 1).colwise().mean();
    return h;
  }

 private:
  std::size_t hidden_;
  std::size_t max_tokens_;
  std::uint64_t seed_;
};

struct BackboneSpec {
  std::string name = "deterministic-stub";
  std::size_t hidden_size = 768;
  std::size_t max_tokens = 512;
  std::uint64_t seed = 0;
  std::string weights_path;

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

inline std::shared_ptr<const EncoderBackbone> make_backbone(const BackboneSpec& spec) {
  if (spec.hidden_size == 0) throw Error("backbone hidden size must be positive");
  if (spec.max_tokens < 2) throw Error("backbone max_tokens must be at least 2");
  if (spec.name == "deterministic-stub") {
    return std::make_shared<HashedContextBackbone>(spec.hidden_size, spec.max_tokens, spec.seed);
  }
  if (spec.name == "position-stub") {
    return std::make_shared<PositionStubBackbone>(spec.hidden_size, spec.max_tokens);
  }
  throw Error("unknown backbone '" + spec.name + "' (available: deterministic-stub, position-stub)");
}

}  // namespace falcon
