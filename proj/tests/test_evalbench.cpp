#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace falcon;
using falcon::testing::fixture;

TEST(Metrics, ConfusionOracle) {
  const auto m = metrics_from_confusion(3, 1, 1, 5);
  EXPECT_DOUBLE_EQ(m.accuracy, 80.0);
  EXPECT_DOUBLE_EQ(m.precision, 75.0);
  EXPECT_DOUBLE_EQ(m.recall, 75.0);
  EXPECT_DOUBLE_EQ(m.f1, 75.0);
  EXPECT_FALSE(m.precision_undefined);
  EXPECT_EQ(to_json(m)["acc"], "80.00");
}

TEST(Metrics, LabelVectorsMatchConfusion) {
  const std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<int> gold{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
  const auto m = compute_metrics(pred, gold);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 5u);
  EXPECT_THROW(compute_metrics(pred, std::vector<int>{1}), Error);
}

TEST(Metrics, NoPositivePredictionsFlagsUndefinedPrecision) {
  const auto m = compute_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_FALSE(m.recall_undefined);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(to_json(m)["precision_undefined"].get<bool>());
  EXPECT_TRUE(metrics_from_confusion(0, 0, 0, 4).recall_undefined);
}

TEST(Metrics, InvariantUnderJointPermutation) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::pair<int, int>> pairs(n);
    for (auto& p : pairs) p = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
    auto split = [](const std::vector<std::pair<int, int>>& v) {
      std::vector<int> a, b;
      for (const auto& [x, y] : v) {
        a.push_back(x);
        b.push_back(y);
      }
      return compute_metrics(a, b);
    };
    const auto before = split(pairs);
    rng.shuffle(pairs);
    const auto after = split(pairs);
    EXPECT_EQ(before.tp, after.tp);
    EXPECT_EQ(before.fp, after.fp);
    EXPECT_EQ(before.fn, after.fn);
    EXPECT_EQ(before.tn, after.tn);
    EXPECT_EQ(before.f1, after.f1);
  }
}

TEST(Metrics, TwoDecimalFormatting) {
  EXPECT_EQ(fmt2(200.0 / 3.0), "66.67");
  EXPECT_EQ(fmt2(0.0), "0.00");
  EXPECT_EQ(fmt2(100.0), "100.00");
}

TEST(Ablations, SixRowsWithDistinctConfigHashes) {
  const auto base = falcon::testing::fixture_config();
  const auto hash = config_hash(base);
  const auto specs = ablation_configs(base);
  ASSERT_EQ(specs.size(), 6u);
  std::set<std::string> hashes, names;
  for (const auto& s : specs) {
    hashes.insert(config_hash(s.config));
    names.insert(s.name);
  }
  EXPECT_EQ(hashes.size(), 6u);
  EXPECT_EQ(names, (std::set<std::string>{"full", "w/o ft", "w/o mt", "w/o ft&mt", "w/o aw", "concat"}));
  EXPECT_EQ(config_hash(base), hash);
  EXPECT_EQ(config_hash(specs[0].config), config_hash(base));
  EXPECT_FALSE(specs[1].config.feature_transfer());
  EXPECT_FALSE(specs[2].config.multitask);
  EXPECT_FALSE(specs[4].config.adaptive_weighting);
  EXPECT_EQ(specs[5].config.fusion, FusionMode::Concat);
}

TEST(Ablations, RunProducesOneRecordPerRowAndSeed) {
  auto base = falcon::testing::fixture_config();
  base.epochs = 1;
  base.max_steps = 2;
  const auto before = config_hash(base);
  std::vector<std::string> progress;
  const auto rows = run_ablations(falcon::testing::fixture_dataset(), base, falcon::testing::fixture_extractor(), {1, 2},
                                  [&](const std::string& s) { progress.push_back(s); });
  EXPECT_EQ(config_hash(base), before);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(progress.size(), 12u);
  std::size_t test_size = 0;
  for (const auto& e : falcon::testing::fixture_dataset()) test_size += e.split == Split::Test;
  for (const auto& row : rows) {
    ASSERT_EQ(row.runs.size(), 2u);
    for (const auto& run : row.runs) {
      EXPECT_EQ(run.report.total(), test_size);
      EXPECT_EQ(run.report.config_hash, row.config_hash);
    }
  }
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  EXPECT_EQ(csv.rfind("config,config_hash,seed,acc,p,r,f1,tp,fp,fn,tn\n", 0), 0u);
  const auto text = ablation_text(rows);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_THROW(run_ablations(falcon::testing::fixture_dataset(), base, std::nullopt, {}), Error);
}

TEST(Transfer, MatchesIndependentlyScoredOracle) {
  const auto& model = falcon::testing::fixture_training().model;
  const auto external = load_labeled(fixture("external_labeled.jsonl"));
  ASSERT_TRUE(external.errors.empty());
  ASSERT_EQ(external.items.size(), 20u);
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& e : external.items) {
    const bool p = model.score(e.candidate) >= 0.5;
    const bool g = e.y_inter == 1;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    tn += !p && !g;
  }
  const auto r = evaluate_transfer(model, external.items);
  EXPECT_EQ(r.tp, tp);
  EXPECT_EQ(r.fp, fp);
  EXPECT_EQ(r.fn, fn);
  EXPECT_EQ(r.tn, tn);
  EXPECT_EQ(r.dataset_id, "external");
  EXPECT_EQ(r.config_hash, config_hash(model.config()));
}

TEST(Transfer, SplitTagsAreIgnoredAndInternalTestIsIdentity) {
  const auto& model = falcon::testing::fixture_training().model;
  auto external = load_labeled(fixture("external_labeled.jsonl")).items;
  const auto a = evaluate_transfer(model, external);
  for (auto& e : external) e.split = Split::Train;
  const auto b = evaluate_transfer(model, external);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());

  const auto test = select_split(falcon::testing::fixture_dataset(), Split::Test);
  EXPECT_EQ(evaluate_transfer(model, test, "test").f1, evaluate(model, test, "test").f1);
}
