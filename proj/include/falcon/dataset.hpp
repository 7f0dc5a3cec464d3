#pragma once

// Labeled interaction examples, decomposition into trajectory triples, splits.

#include <array>
#include <map>
#include <numeric>

#include "falcon/jsonio.hpp"

namespace falcon {

enum class Split { Train, Val, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("unknown split: " + std::string(s));
}

struct LabeledExample {
  CandidateQuadruple candidate;
  int y_inter = 0;
  int y_tra1 = 0;
  int y_tra2 = 0;
  std::optional<Split> split;
};

inline std::optional<std::string> validate(const LabeledExample& e) {
  if (auto err = validate(e.candidate)) return err;
  for (int y : {e.y_inter, e.y_tra1, e.y_tra2}) {
    if (y != 0 && y != 1) return "labels must be binary";
  }
  if (e.y_inter == 1 && (e.y_tra1 != 1 || e.y_tra2 != 1)) {
    return "label entailment violated: y_inter = 1 requires y_tra1 = y_tra2 = 1";
  }
  return std::nullopt;
}

inline Json to_json(const LabeledExample& e) {
  Json j = to_json(e.candidate);
  j["y_inter"] = e.y_inter;
  j["y_tra1"] = e.y_tra1;
  j["y_tra2"] = e.y_tra2;
  if (e.split) j["split"] = std::string(split_name(*e.split));
  return j;
}

inline LabeledExample labeled_from_json(const Json& j) {
  LabeledExample e;
  e.candidate = candidate_from_json(j);
  e.y_inter = j.at("y_inter").get<int>();
  e.y_tra1 = j.at("y_tra1").get<int>();
  e.y_tra2 = j.at("y_tra2").get<int>();
  if (j.contains("split") && !j["split"].is_null()) e.split = parse_split(j["split"].get<std::string>());
  return e;
}

inline LoadResult<LabeledExample> load_labeled(const std::string& path) {
  return load_jsonl<LabeledExample>(path, labeled_from_json,
                                    [](const LabeledExample& e) { return validate(e); });
}

/// Splits a quadruple into its two trajectory triples (Person1 first).
inline std::pair<TrajectoryTriple, TrajectoryTriple> decompose(const LabeledExample& e) {
  const auto& q = e.candidate;
  auto make = [&](const EntityMention& p, int label) {
    TrajectoryTriple t;
    t.segment = q.segment;
    t.person = p;
    t.person.role = Role::Person;
    t.time = q.time;
    t.location = q.location;
    t.label = label;
    return t;
  };
  return {make(q.person1, e.y_tra1), make(q.person2, e.y_tra2)};
}

inline std::pair<TrajectoryTriple, TrajectoryTriple> decompose(const CandidateQuadruple& q) {
  LabeledExample e;
  e.candidate = q;
  auto [a, b] = decompose(e);
  a.label.reset();
  b.label.reset();
  return {a, b};
}

struct SplitOptions {
  std::array<double, 3> ratios{0.7, 0.1, 0.2};
  std::uint64_t seed = 0;
  // Keep all examples of one document inside one split.
  bool group_by_document = false;
};

/// Target sizes by largest-remainder allocation: floors first, leftover units
/// go to the largest fractional parts (ties to the earlier split).
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw Error("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    const std::size_t i = order[k % 3];
    if (ratios[i] == 0.0) {
      --assigned;
      continue;
    }
    ++sizes[i];
  }
  return sizes;
}

/// Returns one split per example; a partition under a seeded shuffle.
inline std::vector<Split> split_dataset(const std::vector<LabeledExample>& examples,
                                        const SplitOptions& options = {}) {
  const auto sizes = split_sizes(examples.size(), options.ratios);
  std::vector<Split> out(examples.size(), Split::Train);
  Rng rng(options.seed);
  if (!options.group_by_document) {
    std::vector<std::size_t> idx(examples.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t c = 0; c < sizes[s]; ++c) out[idx[k++]] = static_cast<Split>(s);
    }
    return out;
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < examples.size(); ++i) groups[examples[i].candidate.segment.doc_id].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [doc, members] : groups) order.push_back(&members);
  rng.shuffle(order);
  std::array<long long, 3> deficit{};
  for (std::size_t s = 0; s < 3; ++s) deficit[s] = static_cast<long long>(sizes[s]);
  for (const auto* members : order) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 3; ++s) {
      if (deficit[s] > deficit[best]) best = s;
    }
    for (std::size_t i : *members) out[i] = static_cast<Split>(best);
    deficit[best] -= static_cast<long long>(members->size());
  }
  return out;
}

struct DatasetSummary {
  std::size_t total = 0;
  std::size_t interaction_positive = 0;
  std::size_t interaction_negative = 0;
  std::size_t trajectory_positive = 0;
  std::size_t trajectory_negative = 0;
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t unassigned = 0;

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

inline DatasetSummary summarize(const std::vector<LabeledExample>& examples) {
  DatasetSummary s;
  s.total = examples.size();
  for (const auto& e : examples) {
    (e.y_inter ? s.interaction_positive : s.interaction_negative)++;
    for (int y : {e.y_tra1, e.y_tra2}) (y ? s.trajectory_positive : s.trajectory_negative)++;
    if (!e.split) {
      ++s.unassigned;
    } else {
      switch (*e.split) {
        case Split::Train: ++s.train; break;
        case Split::Val: ++s.val; break;
        case Split::Test: ++s.test; break;
      }
    }
  }
  return s;
}

inline Json to_json(const DatasetSummary& s) {
  Json j;
  j["total"] = s.total;
  j["interaction"] = {{"positive", s.interaction_positive}, {"negative", s.interaction_negative},
                      {"total", s.interaction_positive + s.interaction_negative}};
  j["trajectory"] = {{"positive", s.trajectory_positive}, {"negative", s.trajectory_negative},
                     {"total", s.trajectory_positive + s.trajectory_negative}};
  j["splits"] = {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"unassigned", s.unassigned}};
  return j;
}

inline std::vector<LabeledExample> select_split(const std::vector<LabeledExample>& examples, Split s) {
  std::vector<LabeledExample> out;
  for (const auto& e : examples) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

}  // namespace falcon
