#pragma once

// Ablation orchestration, comparison tables, transfer evaluation.

#include <iomanip>
#include <sstream>

#include "falcon/model.hpp"

namespace falcon {

struct AblationSpec {
  std::string name;
  TrainConfig config;
};

/// The six comparison rows, each derived from a copy of `base`.
inline std::vector<AblationSpec> ablation_configs(const TrainConfig& base) {
  auto with = [&](auto&& edit) {
    TrainConfig c = base;
    edit(c);
    return c;
  };
  return {
      {"full", with([](TrainConfig& c) { c.fusion = FusionMode::Gated; c.multitask = true; c.adaptive_weighting = true; })},
      {"w/o ft", with([](TrainConfig& c) { c.fusion = FusionMode::Off; c.multitask = true; c.adaptive_weighting = true; })},
      {"w/o mt", with([](TrainConfig& c) { c.fusion = FusionMode::Gated; c.multitask = false; })},
      {"w/o ft&mt", with([](TrainConfig& c) { c.fusion = FusionMode::Off; c.multitask = false; })},
      {"w/o aw", with([](TrainConfig& c) { c.fusion = FusionMode::Gated; c.multitask = true; c.adaptive_weighting = false; })},
      {"concat", with([](TrainConfig& c) { c.fusion = FusionMode::Concat; c.multitask = true; c.adaptive_weighting = true; })},
  };
}

struct AblationRun {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct AblationRow {
  std::string name;
  std::string config_hash;
  std::vector<AblationRun> runs;

  double mean_f1() const {
    double s = 0;
    for (const auto& r : runs) s += r.report.f1;
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  }
};

/// Trains every ablation row once per seed and scores it on the test split.
/// The extractor is only handed to rows that use feature transfer.
inline std::vector<AblationRow> run_ablations(const std::vector<LabeledExample>& dataset, const TrainConfig& base,
                                              const std::optional<TrajectoryExtractor>& extractor,
                                              const std::vector<std::uint64_t>& seeds,
                                              const std::function<void(const std::string&)>& progress = {}) {
  if (seeds.empty()) throw Error("ablation needs at least one seed");
  const auto test = select_split(dataset, Split::Test);
  std::vector<AblationRow> rows;
  for (const auto& spec : ablation_configs(base)) {
    AblationRow row;
    row.name = spec.name;
    row.config_hash = config_hash(spec.config);
    for (const std::uint64_t seed : seeds) {
      TrainConfig c = spec.config;
      c.seed = seed;
      if (progress) progress(spec.name + " seed=" + std::to_string(seed));
      auto result = train(dataset, c, c.feature_transfer() ? extractor : std::nullopt);
      MetricReport r = evaluate(result.model, test, "test");
      r.config_hash = row.config_hash;
      row.runs.push_back({seed, r});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "config,config_hash,seed,acc,p,r,f1,tp,fp,fn,tn\n";
  for (const auto& row : rows) {
    for (const auto& run : row.runs) {
      const auto& m = run.report;
      out << row.name << ',' << row.config_hash << ',' << run.seed << ',' << fmt2(m.accuracy) << ','
          << fmt2(m.precision) << ',' << fmt2(m.recall) << ',' << fmt2(m.f1) << ',' << m.tp << ',' << m.fp << ','
          << m.fn << ',' << m.tn << '\n';
    }
  }
  return out.str();
}

/// Seed-averaged table with fixed-width columns.
inline std::string ablation_text(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "config" << std::setw(18) << "hash" << std::right << std::setw(8) << "Acc"
      << std::setw(8) << "P" << std::setw(8) << "R" << std::setw(8) << "F1" << std::setw(7) << "seeds" << '\n';
  for (const auto& row : rows) {
    double acc = 0, p = 0, r = 0;
    for (const auto& run : row.runs) {
      acc += run.report.accuracy;
      p += run.report.precision;
      r += run.report.recall;
    }
    const double n = static_cast<double>(row.runs.size());
    out << std::left << std::setw(12) << row.name << std::setw(18) << row.config_hash << std::right << std::setw(8)
        << fmt2(acc / n) << std::setw(8) << fmt2(p / n) << std::setw(8) << fmt2(r / n) << std::setw(8)
        << fmt2(row.mean_f1()) << std::setw(7) << row.runs.size() << '\n';
  }
  return out.str();
}

/// Scores a trained model on an external labeled corpus without retraining.
/// Split tags on the external records are ignored.
inline MetricReport evaluate_transfer(const FalconModel& model, const std::vector<LabeledExample>& external,
                                      const std::string& dataset_id = "external") {
  return evaluate(model, external, dataset_id);
}

}  // namespace falcon
