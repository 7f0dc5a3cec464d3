#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace falcon;
using falcon::testing::fixture;

namespace {

// Floor of each share, then leftover units by descending fractional part.
std::array<std::size_t, 3> remainder_oracle(std::size_t n, std::array<double, 3> r) {
  std::array<std::size_t, 3> s{};
  std::vector<std::pair<double, std::size_t>> frac;
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double x = r[i] * static_cast<double>(n);
    s[i] = static_cast<std::size_t>(x);
    used += s[i];
    frac.emplace_back(-(x - std::floor(x)), i);
  }
  std::stable_sort(frac.begin(), frac.end(), [](auto& a, auto& b) { return a.first < b.first; });
  for (std::size_t k = 0; used < n; ++k) {
    if (r[frac[k % 3].second] > 0) {
      ++s[frac[k % 3].second];
      ++used;
    }
  }
  return s;
}

}  // namespace

TEST(Decompose, WorkedQuadrupleSplitsIntoTwoTriples) {
  const auto cands = load_candidates(fixture("gold_audit.jsonl")).items;
  const auto it = std::find_if(cands.begin(), cands.end(), [](const CandidateQuadruple& q) {
    return q.person1.surface == "Berg" && q.person2.surface == "Niemans";
  });
  ASSERT_NE(it, cands.end());
  const auto [t1, t2] = decompose(*it);
  EXPECT_EQ(t1.person.surface, "Berg");
  EXPECT_EQ(t2.person.surface, "Niemans");
  EXPECT_EQ(t1.person.role, Role::Person);
  EXPECT_EQ(t2.person.role, Role::Person);
  for (const auto* t : {&t1, &t2}) {
    EXPECT_EQ(t->time.surface, "1950");
    EXPECT_EQ(t->location.surface, "The Hague");
    EXPECT_EQ(t->time.occurrences, it->time.occurrences);
    EXPECT_EQ(t->location.occurrences, it->location.occurrences);
  }
}

TEST(Decompose, StableUnderReserialization) {
  for (const auto& e : falcon::testing::fixture_dataset()) {
    const auto again = labeled_from_json(to_json(e));
    EXPECT_EQ(to_json(again).dump(), to_json(e).dump());
    const auto [a1, a2] = decompose(e);
    const auto [b1, b2] = decompose(again);
    EXPECT_EQ(to_json(a1).dump(), to_json(b1).dump());
    EXPECT_EQ(to_json(a2).dump(), to_json(b2).dump());
  }
}

TEST(Decompose, TripleCountIsTwiceQuadrupleCount) {
  std::size_t triples = 0;
  for (const auto& e : falcon::testing::fixture_dataset()) {
    const auto [t1, t2] = decompose(e);
    triples += (validate(t1) ? 0 : 1) + (validate(t2) ? 0 : 1);
  }
  EXPECT_EQ(triples, 2 * falcon::testing::fixture_dataset().size());
}

TEST(SplitSizes, FullCorpusSizesAreWithinOneOfProportions) {
  const auto s = split_sizes(4507, {0.7, 0.1, 0.2});
  EXPECT_EQ(s[0] + s[1] + s[2], 4507u);
  const std::array<long, 3> reference{3155, 450, 902};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(std::labs(static_cast<long>(s[i]) - reference[i]), 1L) << i;
  EXPECT_EQ(s, remainder_oracle(4507, {0.7, 0.1, 0.2}));
}

TEST(SplitSizes, RandomSizesStayWithinOneOfExactShares) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.below(10000);
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    const std::array<double, 3> r{a, b, 1 - a - b};
    const auto s = split_sizes(n, r);
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(std::abs(static_cast<double>(s[i]) - r[i] * n), 1.0);
    EXPECT_EQ(s, remainder_oracle(n, r));
  }
}

TEST(SplitSizes, RatioSumViolationIsAnError) {
  EXPECT_THROW(split_sizes(10, {0.7, 0.1, 0.3}), Error);
  EXPECT_THROW(split_sizes(10, {1.2, -0.1, -0.1}), Error);
}

TEST(SplitDataset, IsAPartitionAndDeterministicUnderSeed) {
  const auto& data = falcon::testing::fixture_dataset();
  SplitOptions opt;
  opt.seed = 99;
  const auto a = split_dataset(data, opt);
  const auto b = split_dataset(data, opt);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), data.size());
  std::array<std::size_t, 3> counts{};
  for (Split s : a) ++counts[static_cast<std::size_t>(s)];
  EXPECT_EQ(counts, split_sizes(data.size(), opt.ratios));
  opt.seed = 100;
  EXPECT_NE(split_dataset(data, opt), a);
}

TEST(SplitDataset, AllTrainRatios) {
  SplitOptions opt;
  opt.ratios = {1, 0, 0};
  for (Split s : split_dataset(falcon::testing::fixture_dataset(), opt)) EXPECT_EQ(s, Split::Train);
}

TEST(SplitDataset, DocumentGroupingKeepsDocumentsTogether) {
  const auto& data = falcon::testing::fixture_dataset();
  SplitOptions opt;
  opt.group_by_document = true;
  opt.seed = 4;
  const auto splits = split_dataset(data, opt);
  std::map<std::string, std::set<Split>> seen;
  for (std::size_t i = 0; i < data.size(); ++i) seen[data[i].candidate.segment.doc_id].insert(splits[i]);
  for (const auto& [doc, s] : seen) EXPECT_EQ(s.size(), 1u) << doc;
}

TEST(Summarize, EmptySetIsAllZeros) {
  EXPECT_EQ(summarize({}), DatasetSummary{});
  EXPECT_EQ(to_json(summarize({}))["interaction"]["total"], 0);
}

TEST(Summarize, FixtureMatchesIndependentTally) {
  const Json expected = Json::parse(falcon::testing::read_file(fixture("expected_summary.json")));
  EXPECT_EQ(to_json(summarize(falcon::testing::fixture_dataset())), expected);
}

TEST(LoadLabeled, EntailmentHoldsOnEveryLoadedRecord) {
  const auto r = load_labeled(fixture("labeled.jsonl"));
  EXPECT_TRUE(r.errors.empty());
  for (const auto& e : r.items) {
    if (e.y_inter == 1) {
      EXPECT_EQ(e.y_tra1, 1);
      EXPECT_EQ(e.y_tra2, 1);
    }
  }
}

TEST(LoadLabeled, EntailmentViolationIsRejected) {
  falcon::testing::TempDir dir;
  std::ifstream in(fixture("labeled.jsonl"));
  std::string line;
  std::ofstream out(dir.file("bad.jsonl"));
  for (int i = 0; i < 3 && std::getline(in, line); ++i) {
    Json j = Json::parse(line);
    if (i == 1) {
      j["y_inter"] = 1;
      j["y_tra2"] = 0;
    }
    if (i == 2) j["y_inter"] = 2;
    out << j.dump() << '\n';
  }
  out.close();
  const auto r = load_labeled(dir.file("bad.jsonl"));
  EXPECT_EQ(r.items.size(), 1u);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.errors[1].line, 3u);
}
