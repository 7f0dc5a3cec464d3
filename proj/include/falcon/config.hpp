#pragma once

// Training configuration: key = value file format, JSON form, stable hash.

#include <fstream>
#include <map>

#include "falcon/backbone.hpp"
#include "falcon/encoder.hpp"
#include "falcon/jsonio.hpp"

namespace falcon {

enum class FusionMode { Gated, Concat, Off };
enum class CrossAttentionMode { Joint, Literal };

inline std::string_view fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Gated: return "gated";
    case FusionMode::Concat: return "concat";
    case FusionMode::Off: return "off";
  }
  return "gated";
}

struct TrainConfig {
  BackboneSpec backbone;
  double lr = 5e-5;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t patience = 3;  // epochs without validation-F1 improvement
  std::uint64_t seed = 42;
  std::size_t max_steps = 0;  // 0 = no cap
  FusionMode fusion = FusionMode::Gated;
  bool multitask = true;
  bool adaptive_weighting = true;
  AttentionNorm attention_norm = AttentionNorm::Softmax;
  CrossAttentionMode cross_attention = CrossAttentionMode::Joint;
  std::size_t mlp_layers = 2;
  double threshold = 0.5;
  std::string extractor_checkpoint;

  bool feature_transfer() const { return fusion != FusionMode::Off; }

  void validate() const {
    if (!(lr > 0)) throw Error("lr must be positive");
    if (weight_decay < 0) throw Error("weight_decay must be non-negative");
    if (batch_size == 0) throw Error("batch_size must be positive");
    if (epochs == 0) throw Error("epochs must be positive");
    if (mlp_layers == 0) throw Error("mlp_layers must be positive");
    if (backbone.hidden_size == 0) throw Error("hidden_size must be positive");
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + key + "' expects on/off, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      if (!v.empty() && v[0] == '-') throw Error("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw Error("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' has invalid value '" + v + "'");
  }
}

}  // namespace detail

/// Applies one key/value setting; unknown keys are an error.
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
  else if (key == "patience") c.patience = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "max_steps") c.max_steps = parse_number<std::size_t>(key, value);
  else if (key == "mlp_layers") c.mlp_layers = parse_number<std::size_t>(key, value);
  else if (key == "threshold") c.threshold = parse_number<double>(key, value);
  else if (key == "mt") c.multitask = parse_bool(key, value);
  else if (key == "aw") c.adaptive_weighting = parse_bool(key, value);
  else if (key == "ft") c.fusion = parse_bool(key, value) ? (c.fusion == FusionMode::Off ? FusionMode::Gated : c.fusion) : FusionMode::Off;
  else if (key == "fusion") {
    if (value == "gated") c.fusion = FusionMode::Gated;
    else if (value == "concat") c.fusion = FusionMode::Concat;
    else if (value == "off") c.fusion = FusionMode::Off;
    else throw Error("fusion must be gated, concat or off");
  } else if (key == "attention_norm") {
    if (value == "softmax") c.attention_norm = AttentionNorm::Softmax;
    else if (value == "literal") c.attention_norm = AttentionNorm::Literal;
    else throw Error("attention_norm must be softmax or literal");
  } else if (key == "cross_attention") {
    if (value == "joint") c.cross_attention = CrossAttentionMode::Joint;
    else if (value == "literal") c.cross_attention = CrossAttentionMode::Literal;
    else throw Error("cross_attention must be joint or literal");
  } else if (key == "backbone") c.backbone.name = value;
  else if (key == "hidden_size") c.backbone.hidden_size = parse_number<std::size_t>(key, value);
  else if (key == "max_tokens") c.backbone.max_tokens = parse_number<std::size_t>(key, value);
  else if (key == "backbone_seed") c.backbone.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "weights_path") c.backbone.weights_path = value;
  else if (key == "extractor_checkpoint") c.extractor_checkpoint = value;
  else throw Error("unknown config key '" + key + "'");
}

/// Parses "key = value" lines; '#' starts a comment.
inline TrainConfig parse_config(std::istream& in, TrainConfig c = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  return parse_config(in);
}

inline Json backbone_to_json(const BackboneSpec& b) {
  return Json{{"name", b.name}, {"hidden_size", b.hidden_size}, {"max_tokens", b.max_tokens},
              {"seed", b.seed}, {"weights_path", b.weights_path}};
}

inline BackboneSpec backbone_from_json(const Json& j) {
  BackboneSpec b;
  b.name = j.at("name").get<std::string>();
  b.hidden_size = j.at("hidden_size").get<std::size_t>();
  b.max_tokens = j.at("max_tokens").get<std::size_t>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.weights_path = j.value("weights_path", std::string());
  return b;
}

inline Json to_json(const TrainConfig& c) {
  Json j;
  j["backbone"] = backbone_to_json(c.backbone);
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["max_steps"] = c.max_steps;
  j["fusion"] = std::string(fusion_mode_name(c.fusion));
  j["mt"] = c.multitask;
  j["aw"] = c.adaptive_weighting;
  j["attention_norm"] = c.attention_norm == AttentionNorm::Softmax ? "softmax" : "literal";
  j["cross_attention"] = c.cross_attention == CrossAttentionMode::Joint ? "joint" : "literal";
  j["mlp_layers"] = c.mlp_layers;
  j["threshold"] = c.threshold;
  j["extractor_checkpoint"] = c.extractor_checkpoint;
  return j;
}

inline TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.backbone = backbone_from_json(j.at("backbone"));
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_steps = j.at("max_steps").get<std::size_t>();
  apply_setting(c, "fusion", j.at("fusion").get<std::string>());
  c.multitask = j.at("mt").get<bool>();
  c.adaptive_weighting = j.at("aw").get<bool>();
  apply_setting(c, "attention_norm", j.at("attention_norm").get<std::string>());
  apply_setting(c, "cross_attention", j.at("cross_attention").get<std::string>());
  c.mlp_layers = j.at("mlp_layers").get<std::size_t>();
  c.threshold = j.at("threshold").get<double>();
  c.extractor_checkpoint = j.value("extractor_checkpoint", std::string());
  return c;
}

/// Hash over every setting that changes what gets trained (file paths excluded).
inline std::string config_hash(const TrainConfig& c) {
  Json j = to_json(c);
  j.erase("extractor_checkpoint");
  j["backbone"].erase("weights_path");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace falcon
