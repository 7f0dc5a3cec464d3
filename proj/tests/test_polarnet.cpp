#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace falcon;
using falcon::testing::fixture;

namespace {

SignedGraph random_graph(Rng& rng, std::size_t n, double p, bool real_weights = false) {
  SignedGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node("n" + std::to_string(i));
  const double choices[] = {-2.0, 1.0, 2.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < p) g.add_edge(i, j, real_weights ? rng.uniform(-3, 3) : choices[rng.below(3)]);
    }
  }
  return g;
}

std::vector<int> random_partition(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<int> part(n);
  for (auto& c : part) c = static_cast<int>(rng.below(k));
  return part;
}

// (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)
double double_sum_q(const Eigen::MatrixXd& a, const std::vector<int>& part) {
  const Eigen::VectorXd k = a.rowwise().sum();
  const double two_m = k.sum();
  double q = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (part[static_cast<std::size_t>(i)] == part[static_cast<std::size_t>(j)]) q += a(i, j) - k(i) * k(j) / two_m;
    }
  }
  return q / two_m;
}

SignedGraph two_cliques(std::size_t size, std::vector<int>& part) {
  SignedGraph g;
  part.clear();
  for (std::size_t i = 0; i < 2 * size; ++i) {
    g.add_node("p" + std::to_string(i));
    part.push_back(i < size ? 0 : 1);
  }
  for (std::size_t i = 0; i < 2 * size; ++i) {
    for (std::size_t j = i + 1; j < 2 * size; ++j) {
      if (part[i] == part[j]) g.add_edge(i, j, 2.0);
    }
  }
  for (std::size_t i = 0; i < size; ++i) g.add_edge(i, size + (i + 1) % size, -2.0);
  return g;
}

InteractionRecord typed(const std::string& a, const std::string& b, InteractionType t, int year = 1990,
                        const std::string& id = "") {
  InteractionRecord r;
  r.record_id = id;
  r.person1 = {a, std::nullopt};
  r.person2 = {b, std::nullopt};
  r.year = year;
  r.time_surface = std::to_string(year);
  r.type = t;
  return r;
}

AttributeTable parties(const std::vector<std::pair<std::string, std::string>>& rows) {
  AttributeTable t;
  for (const auto& [person, party] : rows) t.add({person, party, std::nullopt, std::nullopt, std::nullopt});
  return t;
}

}  // namespace

TEST(BuildGraph, TypeWeightsAccumulatePerPair) {
  const auto attrs = parties({{"Ames", "R"}, {"Bose", "D"}, {"Cole", "R"}});
  const std::vector<InteractionRecord> recs{typed("Ames", "Bose", InteractionType::Adversarial, 1990, "a"),
                                            typed("Bose", "Ames", InteractionType::Neutral, 1990, "b"),
                                            typed("Ames", "Cole", InteractionType::Cooperative, 1990, "c")};
  BuildReport rep;
  const auto g = build_graph(recs, attrs, {}, &rep);
  EXPECT_EQ(g.node_count(), 3u);
  ASSERT_EQ(g.edge_count(), 2u);
  const auto a = *g.find("ames"), b = *g.find("bose"), c = *g.find("cole");
  const auto adj = g.adjacency();
  EXPECT_EQ(adj(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), -1.0);
  EXPECT_EQ(adj(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)), 2.0);
  EXPECT_EQ(rep.used, 3u);
  EXPECT_EQ(g.edges()[0].provenance.size() + g.edges()[1].provenance.size(), 3u);
}

TEST(BuildGraph, ZeroWeightEdgeIsRetainedByDefault) {
  const auto attrs = parties({{"Ames", "R"}, {"Bose", "D"}});
  const std::vector<InteractionRecord> recs{typed("Ames", "Bose", InteractionType::Adversarial),
                                            typed("Ames", "Bose", InteractionType::Cooperative)};
  const auto kept = build_graph(recs, attrs);
  ASSERT_EQ(kept.edge_count(), 1u);
  EXPECT_EQ(kept.edges()[0].weight, 0.0);
  GraphOptions opt;
  opt.drop_zero_edges = true;
  EXPECT_EQ(build_graph(recs, attrs, opt).edge_count(), 0u);
}

TEST(BuildGraph, SkipsUntypedUnknownAndOutOfWindowRecords) {
  const auto attrs = parties({{"Ames", "R"}, {"Bose", "D"}});
  auto untyped = typed("Ames", "Bose", InteractionType::Neutral);
  untyped.type.reset();
  const std::vector<InteractionRecord> recs{untyped, typed("Ames", "Zed", InteractionType::Neutral),
                                            typed("Ames", "Bose", InteractionType::Neutral, 1800),
                                            typed("Ames", "ames", InteractionType::Neutral)};
  GraphOptions opt;
  opt.window = {1900, 2000};
  BuildReport rep;
  EXPECT_EQ(build_graph(recs, attrs, opt, &rep).edge_count(), 0u);
  EXPECT_EQ(rep.untyped, 1u);
  EXPECT_EQ(rep.unknown_party, 1u);
  EXPECT_EQ(rep.outside_window, 1u);
  EXPECT_EQ(rep.self_pairs, 1u);
}

TEST(Modularity, SingleCommunityIsZero) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_graph(rng, 12, 0.4);
    if (g.edge_count() == 0 || std::abs(g.adjacency().sum()) < 1e-9) continue;
    EXPECT_NEAR(modularity(g, std::vector<int>(12, 0)), 0.0, 1e-12);
  }
}

TEST(Modularity, MatchesDoubleSumOracle) {
  Rng rng(2);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g = random_graph(rng, 4 + rng.below(20), 0.3, t % 2 == 0);
    const auto a = g.adjacency();
    if (std::abs(a.sum()) < 1e-6) continue;
    const auto part = random_partition(rng, g.node_count(), 1 + rng.below(4));
    EXPECT_NEAR(modularity(g, part), double_sum_q(a, part), 1e-9);
    ++checked;
  }
  EXPECT_GE(checked, 90);
}

TEST(Modularity, GomezCombinesPositiveAndNegativeParts) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto g = random_graph(rng, 5 + rng.below(15), 0.4, true);
    if (g.edge_count() == 0) continue;
    const auto part = random_partition(rng, g.node_count(), 2);
    const Eigen::MatrixXd a = g.adjacency();
    const Eigen::MatrixXd pos = a.cwiseMax(0.0), neg = (-a).cwiseMax(0.0);
    const double wp = pos.sum(), wn = neg.sum();
    const double qp = wp > 0 ? double_sum_q(pos, part) : 0.0;
    const double qn = wn > 0 ? double_sum_q(neg, part) : 0.0;
    EXPECT_NEAR(modularity(g, part, SignedMode::Gomez), (wp * qp - wn * qn) / (wp + wn), 1e-9);
  }
}

TEST(Modularity, InvariantUnderRelabelingAndScaling) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    auto g = random_graph(rng, 15, 0.3, true);
    if (g.edge_count() == 0 || std::abs(g.adjacency().sum()) < 1e-6) continue;
    const auto part = random_partition(rng, 15, 3);
    std::vector<int> perm{0, 1, 2};
    rng.shuffle(perm);
    std::vector<int> relabeled;
    for (int c : part) relabeled.push_back(perm[static_cast<std::size_t>(c)] + 10);
    for (auto mode : {SignedMode::Verbatim, SignedMode::Gomez}) {
      const double q = modularity(g, part, mode);
      EXPECT_NEAR(modularity(g, relabeled, mode), q, 1e-12 * std::max(1.0, std::abs(q)));
      auto edges = g.edges();
      for (auto& e : edges) e.weight *= 3.5;
      SignedGraph scaled = g;
      scaled.set_edges(edges);
      EXPECT_NEAR(modularity(scaled, part, mode), q, 1e-12 * std::max(1.0, std::abs(q)));
    }
  }
}

TEST(Modularity, DegenerateGraphIsAnError) {
  SignedGraph g;
  g.add_node("a");
  g.add_node("b");
  g.add_node("c");
  EXPECT_THROW(modularity(g, {0, 1, 0}), Error);
  g.add_edge(0, 1, 2.0);
  g.add_edge(1, 2, -2.0);
  try {
    modularity(g, {0, 1, 0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate graph"), std::string::npos);
  }
  EXPECT_THROW(modularity(g, {0, 1}), Error);
}

TEST(NullModel, PreservesDegreesAndWeightMultiset) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto g = random_graph(rng, 20, 0.25, true);
    if (g.edge_count() < 2) continue;
    const auto s = randomize_null(g, 1000 + static_cast<std::uint64_t>(t));
    EXPECT_EQ(s.graph.degrees(), g.degrees());
    auto w0 = g.weights(), w1 = s.graph.weights();
    std::sort(w0.begin(), w0.end());
    std::sort(w1.begin(), w1.end());
    EXPECT_EQ(w0, w1);
    EXPECT_EQ(s.graph.edge_count(), g.edge_count());
    EXPECT_EQ(s.accepted_swaps, 10 * g.edge_count()) << s.warning.value_or("");
  }
}

TEST(NullModel, DifferentSeedsGiveDifferentGraphs) {
  Rng rng(6);
  const auto g = random_graph(rng, 20, 0.3);
  auto edge_set = [](const SignedGraph& h) {
    std::set<std::tuple<std::size_t, std::size_t, double>> s;
    for (const auto& e : h.edges()) s.emplace(e.u, e.v, e.weight);
    return s;
  };
  int differ = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    differ += edge_set(randomize_null(g, 2 * i).graph) != edge_set(randomize_null(g, 2 * i + 1).graph);
  }
  EXPECT_GE(differ, 99);
  EXPECT_EQ(edge_set(randomize_null(g, 7).graph), edge_set(randomize_null(g, 7).graph));
}

TEST(NullModel, StarGraphCannotSwap) {
  SignedGraph g;
  for (int i = 0; i < 5; ++i) g.add_node("s" + std::to_string(i));
  for (std::size_t i = 1; i < 5; ++i) g.add_edge(0, i, static_cast<double>(i));
  const auto s = randomize_null(g, 1);
  EXPECT_EQ(s.accepted_swaps, 0u);
  EXPECT_TRUE(s.warning.has_value());
  EXPECT_EQ(s.graph.degrees(), g.degrees());
}

TEST(StandardizedModularity, PlantedCliquesAreSignificant) {
  std::vector<int> part;
  const auto g = two_cliques(8, part);
  const auto r = standardized_modularity(g, part, 200, 11);
  EXPECT_GT(r.z, 3.0);
  EXPECT_GT(r.q_original, r.mu);
}

TEST(StandardizedModularity, RandomPartitionOfRandomGraphIsUnremarkable) {
  Rng rng(8);
  const auto g = random_graph(rng, 50, 0.1);
  const auto part = random_partition(rng, 50, 2);
  const auto r = standardized_modularity(g, part, 200, 12);
  EXPECT_LT(std::abs(r.z), 4.0);
}

TEST(StandardizedModularity, DeterministicAcrossRunsAndThreadCounts) {
  std::vector<int> part;
  const auto g = two_cliques(6, part);
  const auto a = standardized_modularity(g, part, 100, 5, SignedMode::Verbatim, 1);
  const auto b = standardized_modularity(g, part, 100, 5, SignedMode::Verbatim, 1);
  const auto c = standardized_modularity(g, part, 100, 5, SignedMode::Verbatim, 4);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(to_json(a).dump(), to_json(c).dump());
  EXPECT_NE(to_json(a).dump(), to_json(standardized_modularity(g, part, 100, 6)).dump());
}

TEST(StandardizedModularity, MatchesDirectSampleStatistics) {
  std::vector<int> part;
  const auto g = two_cliques(5, part);
  const std::size_t n = 50;
  const auto r = standardized_modularity(g, part, n, 77);
  std::vector<double> q;
  for (std::size_t i = 0; i < n; ++i) q.push_back(modularity(randomize_null(g, derive_seed(77, i)).graph, part));
  double mu = 0;
  for (double v : q) mu += v;
  mu /= static_cast<double>(n);
  double ss = 0;
  for (double v : q) ss += (v - mu) * (v - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
  EXPECT_NEAR(r.mu, mu, 1e-12);
  EXPECT_NEAR(r.sigma, sigma, 1e-12);
  EXPECT_NEAR(r.z, (r.q_original - mu) / sigma, 1e-9);
}

TEST(StandardizedModularity, ZeroSpreadIsAnError) {
  SignedGraph g;
  for (int i = 0; i < 4; ++i) g.add_node("s" + std::to_string(i));
  for (std::size_t i = 1; i < 4; ++i) g.add_edge(0, i, 2.0);
  EXPECT_THROW(standardized_modularity(g, {0, 1, 0, 1}, 20, 1), Error);
  EXPECT_THROW(standardized_modularity(g, {0, 1, 0, 1}, 1, 1), Error);
}

TEST(AnnualPolarization, SparseYearsAreNullWithNote) {
  const auto attrs = parties({{"Ames", "R"}, {"Bose", "D"}, {"Cole", "R"}, {"Dunn", "D"}});
  std::vector<InteractionRecord> recs{typed("Ames", "Bose", InteractionType::Adversarial, 1990)};
  PolarizationOptions o;
  o.samples = 20;
  const auto pts = annual_polarization(recs, attrs, 1989, 1990, false, o);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_FALSE(pts[0].report.has_value());
  EXPECT_FALSE(pts[1].report.has_value());
  EXPECT_EQ(pts[1].edges, 1u);
  EXPECT_FALSE(pts[1].note.empty());
  const auto csv = polarization_csv(pts);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Trends, InterPartyShareAndTypeShares) {
  const auto attrs = parties({{"Ames", "R"}, {"Bose", "D"}, {"Cole", "R"}});
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 7; ++i) recs.push_back(typed("Ames", "Cole", InteractionType::Cooperative, 1953));
  recs.push_back(typed("Ames", "Bose", InteractionType::Adversarial, 1951));
  recs.push_back(typed("Cole", "Bose", InteractionType::Adversarial, 1958));
  recs.push_back(typed("Ames", "Bose", InteractionType::Neutral, 1959));
  recs.push_back(typed("Ames", "Bose", InteractionType::Cooperative, 1975));
  const auto s = trend_ratios(recs, attrs);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_EQ(s.rows[0].bin, 1950);
  EXPECT_NEAR(*s.rows[0].inter_share, 0.30, 1e-12);
  EXPECT_NEAR(*s.rows[0].adversarial, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(s.rows[1].bin, 1960);
  EXPECT_FALSE(s.rows[1].inter_share.has_value());
  EXPECT_EQ(*s.rows[2].cooperative, 1.0);
  for (const auto& r : s.rows) {
    if (r.adversarial) EXPECT_NEAR(*r.adversarial + *r.cooperative + *r.neutral, 1.0, 1e-12);
  }
  const auto csv = trend_csv(s);
  EXPECT_NE(csv.find("1950,10,3,0.300000,0.666667,0.000000,0.333333\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("1960,0,0,,,,\n"), std::string::npos) << csv;
}

TEST(Trends, SharesSumToOneOnRandomRecords) {
  const auto attrs = AttributeTable::load(fixture("attrs.jsonl"));
  std::vector<std::string> people;
  std::ifstream in(fixture("attrs.jsonl"));
  for (std::string line; std::getline(in, line);) people.push_back(Json::parse(line)["person"]);
  Rng rng(9);
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 500; ++i) {
    const auto a = people[rng.below(people.size())], b = people[rng.below(people.size())];
    recs.push_back(typed(a, b, static_cast<InteractionType>(rng.below(3)), 1900 + static_cast<int>(rng.below(120))));
  }
  for (auto bin : {TrendBin::Decade, TrendBin::Year}) {
    for (const auto& r : trend_ratios(recs, attrs, bin).rows) {
      if (r.inter_share) EXPECT_LE(*r.inter_share, 1.0);
      if (r.adversarial) EXPECT_NEAR(*r.adversarial + *r.cooperative + *r.neutral, 1.0, 1e-12);
    }
  }
}

TEST(Distance, QuarterMeridianAndSymmetry) {
  EXPECT_NEAR(haversine_km({0, 0}, {0, 90}), 10007.5, 10007.5 * 1e-3);
  EXPECT_NEAR(haversine_km({0, 0}, {90, 0}), std::numbers::pi * kEarthRadiusKm / 2, 1e-9);
  EXPECT_EQ(haversine_km({52.08, 4.31}, {52.08, 4.31}), 0.0);
  Rng rng(10);
  for (int t = 0; t < 200; ++t) {
    const GeoPoint a{rng.uniform(-90, 90), rng.uniform(-180, 180)}, b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    EXPECT_NEAR(haversine_km(a, b), haversine_km(b, a), 1e-9);
    EXPECT_LE(haversine_km(a, b), std::numbers::pi * kEarthRadiusKm + 1e-9);
  }
}

TEST(Distance, InteractionDistanceSumsBothBirthplaces) {
  const GeoPoint loc{0, 0};
  EXPECT_NEAR(*interaction_distance(loc, GeoPoint{0, 90}, GeoPoint{90, 0}), std::numbers::pi * kEarthRadiusKm, 1e-9);
  EXPECT_FALSE(interaction_distance(loc, std::nullopt, GeoPoint{0, 1}).has_value());
  EXPECT_FALSE(interaction_distance(std::nullopt, GeoPoint{0, 1}, GeoPoint{0, 1}).has_value());
}

TEST(GraphStats, ClusteringOnTriangleAndStar) {
  SignedGraph tri;
  for (int i = 0; i < 3; ++i) tri.add_node("t" + std::to_string(i));
  tri.add_edge(0, 1, 1);
  tri.add_edge(1, 2, -2);
  tri.add_edge(0, 2, 2);
  EXPECT_DOUBLE_EQ(*clustering_coefficient(tri), 1.0);

  SignedGraph star;
  for (int i = 0; i < 5; ++i) star.add_node("s" + std::to_string(i));
  for (std::size_t i = 1; i < 5; ++i) star.add_edge(0, i, 1);
  EXPECT_DOUBLE_EQ(*clustering_coefficient(star), 0.0);

  SignedGraph pair;
  pair.add_node("a");
  pair.add_node("b");
  pair.add_edge(0, 1, 1);
  EXPECT_FALSE(clustering_coefficient(pair).has_value());
}

TEST(GraphStats, PowerLawExponentRecoversPlantedAlpha) {
  Rng rng(12);
  const double alpha = 2.5, k_min = 2;
  std::vector<std::size_t> deg;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    deg.push_back(static_cast<std::size_t>(std::floor((k_min - 0.5) * std::pow(1 - u, -1 / (alpha - 1)) + 0.5)));
  }
  const auto fit = fit_power_law(deg, 2);
  ASSERT_TRUE(fit.alpha.has_value());
  EXPECT_NEAR(*fit.alpha, alpha, 0.1);
  EXPECT_FALSE(fit_power_law(std::vector<std::size_t>{0, 1, 1}, 2).alpha.has_value());
}

TEST(GraphStats, PageRankIsADistribution) {
  Rng rng(13);
  const auto g = random_graph(rng, 30, 0.15);
  const auto s = graph_stats(g);
  double total = 0;
  for (double v : s.pagerank) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
  std::size_t counted = 0;
  for (const auto& [k, c] : s.degree_histogram) counted += c;
  EXPECT_EQ(counted, 30u);

  SignedGraph cycle;
  for (int i = 0; i < 6; ++i) cycle.add_node("c" + std::to_string(i));
  for (std::size_t i = 0; i < 6; ++i) cycle.add_edge(i, (i + 1) % 6, i % 2 ? -1.0 : 2.0);
  for (double v : pagerank(cycle)) EXPECT_NEAR(v, 1.0 / 6, 1e-2);
}

TEST(Exports, EdgeCsvAndGexf) {
  const auto attrs = parties({{"Ames", "R&D"}, {"Bose", "D"}});
  const auto g = build_graph({typed("Ames", "Bose", InteractionType::Cooperative, 1990, "x")}, attrs);
  EXPECT_EQ(edge_csv(g), "source,target,weight,records\n\"ames\",\"bose\",2,1\n");
  const auto gexf = to_gexf(g);
  EXPECT_NE(gexf.find("value=\"R&amp;D\""), std::string::npos);
  EXPECT_NE(gexf.find("weight=\"2\""), std::string::npos);
}
