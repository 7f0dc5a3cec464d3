#pragma once

#include <cstdio>
#include <span>
#include <string>

#include "falcon/jsonio.hpp"

namespace falcon {

/// Binary classification report; positive class = "interaction".
/// Percentages are stored unrounded and printed with two decimals.
struct MetricReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool precision_undefined = false;  // TP + FP = 0
  bool recall_undefined = false;     // TP + FN = 0
  std::string dataset_id;
  std::string config_hash;

  std::size_t total() const { return tp + fp + fn + tn; }
};

inline MetricReport metrics_from_confusion(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  MetricReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  const double total = static_cast<double>(tp + fp + fn + tn);
  r.accuracy = total > 0 ? 100.0 * static_cast<double>(tp + tn) / total : 0.0;
  r.precision_undefined = tp + fp == 0;
  r.recall_undefined = tp + fn == 0;
  r.precision = r.precision_undefined ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = r.recall_undefined ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline MetricReport compute_metrics(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) throw Error("prediction and gold lengths differ");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool g = gold[i] != 0;
    if (p && g) ++tp;
    else if (p && !g) ++fp;
    else if (!p && g) ++fn;
    else ++tn;
  }
  return metrics_from_confusion(tp, fp, fn, tn);
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline Json to_json(const MetricReport& r) {
  Json j;
  j["dataset_id"] = r.dataset_id;
  j["config_hash"] = r.config_hash;
  j["acc"] = fmt2(r.accuracy);
  j["p"] = fmt2(r.precision);
  j["r"] = fmt2(r.recall);
  j["f1"] = fmt2(r.f1);
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["tn"] = r.tn;
  if (r.precision_undefined) j["precision_undefined"] = true;
  if (r.recall_undefined) j["recall_undefined"] = true;
  return j;
}

}  // namespace falcon
