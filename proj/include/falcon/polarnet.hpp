#pragma once

// Weighted signed interaction networks and polarization statistics.

#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "falcon/extract.hpp"

namespace falcon {

inline double type_weight(InteractionType t) {
  switch (t) {
    case InteractionType::Adversarial: return -2.0;
    case InteractionType::Cooperative: return 2.0;
    case InteractionType::Neutral: return 1.0;
  }
  return 0.0;
}

struct NodeAttributes {
  std::string person;
  std::optional<std::string> party;
  std::optional<std::string> state;
  std::optional<GeoPoint> birthplace;
  std::optional<std::string> profession;
};

/// Attributes keyed by normalized person identifier (entity id or surface).
class AttributeTable {
 public:
  void add(NodeAttributes a) {
    const std::string key = normalize_surface(a.person);
    rows_[key] = std::move(a);
  }

  const NodeAttributes* find(std::string_view person) const {
    auto it = rows_.find(normalize_surface(person));
    return it == rows_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return rows_.size(); }

  /// JSONL lines {"person", "party"?, "state"?, "birth_lat"?, "birth_lon"?, "profession"?}.
  static AttributeTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open attribute file " + path);
    AttributeTable t;
    std::string line;
    std::size_t lineno = 0;
    auto opt_str = [](const Json& j, const char* k) -> std::optional<std::string> {
      if (!j.contains(k) || j[k].is_null()) return std::nullopt;
      return j[k].get<std::string>();
    };
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        const Json j = Json::parse(line);
        NodeAttributes a;
        a.person = j.at("person").get<std::string>();
        a.party = opt_str(j, "party");
        a.state = opt_str(j, "state");
        a.profession = opt_str(j, "profession");
        if (j.contains("birth_lat") && !j["birth_lat"].is_null() && j.contains("birth_lon") && !j["birth_lon"].is_null()) {
          a.birthplace = GeoPoint{j["birth_lat"].get<double>(), j["birth_lon"].get<double>()};
        }
        t.add(std::move(a));
      } catch (const std::exception& e) {
        throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return t;
  }

 private:
  std::map<std::string, NodeAttributes> rows_;
};

inline std::string person_key(const PersonRef& p) { return normalize_surface(p.id ? *p.id : p.surface); }

struct GraphEdge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 0;
  std::vector<std::string> provenance;
};

class SignedGraph {
 public:
  std::size_t add_node(const std::string& id, NodeAttributes attrs = {}) {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    index_[id] = nodes_.size();
    ids_.push_back(id);
    attrs.person = attrs.person.empty() ? id : attrs.person;
    nodes_.push_back(std::move(attrs));
    return nodes_.size() - 1;
  }

  /// Adds weight to the (u, v) edge, creating it when absent. Self-loops are rejected.
  void add_edge(std::size_t a, std::size_t b, double w, std::string provenance = {}) {
    if (a == b) throw Error("self-loop on node " + ids_.at(a));
    if (a >= nodes_.size() || b >= nodes_.size()) throw Error("edge endpoint out of range");
    const auto key = std::minmax(a, b);
    auto it = edge_index_.find(key);
    if (it == edge_index_.end()) {
      edge_index_[key] = edges_.size();
      edges_.push_back({key.first, key.second, 0.0, {}});
      it = edge_index_.find(key);
    }
    auto& e = edges_[it->second];
    e.weight += w;
    if (!provenance.empty()) e.provenance.push_back(std::move(provenance));
  }

  void remove_zero_edges() {
    std::vector<GraphEdge> kept;
    for (auto& e : edges_) {
      if (e.weight != 0.0) kept.push_back(std::move(e));
    }
    edges_ = std::move(kept);
    reindex();
  }

  /// Replaces the edge list wholesale (used by the null model).
  void set_edges(std::vector<GraphEdge> edges) {
    edges_ = std::move(edges);
    for (auto& e : edges_) {
      if (e.u > e.v) std::swap(e.u, e.v);
    }
    reindex();
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const NodeAttributes& attributes(std::size_t i) const { return nodes_.at(i); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }
  bool has_edge(std::size_t a, std::size_t b) const { return edge_index_.count(std::minmax(a, b)) > 0; }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    for (const auto& e : edges_) {
      ++d[e.u];
      ++d[e.v];
    }
    return d;
  }

  std::vector<double> weights() const {
    std::vector<double> w;
    for (const auto& e : edges_) w.push_back(e.weight);
    return w;
  }

  /// Dense adjacency (test oracles, small graphs).
  Eigen::MatrixXd adjacency() const {
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges_) {
      a(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = e.weight;
      a(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = e.weight;
    }
    return a;
  }

 private:
  void reindex() {
    edge_index_.clear();
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto key = std::make_pair(edges_[i].u, edges_[i].v);
      if (edges_[i].u == edges_[i].v) throw Error("self-loop in edge list");
      if (!edge_index_.emplace(key, i).second) throw Error("duplicate edge in edge list");
    }
  }

  std::vector<NodeAttributes> nodes_;
  std::vector<std::string> ids_;
  std::map<std::string, std::size_t> index_;
  std::vector<GraphEdge> edges_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index_;
};

struct YearWindow {
  std::optional<int> from;  // inclusive
  std::optional<int> to;    // inclusive

  bool bounded() const { return from || to; }
  bool contains(std::optional<int> y) const {
    if (!bounded()) return true;
    if (!y) return false;
    return (!from || *y >= *from) && (!to || *y <= *to);
  }
};

struct GraphOptions {
  YearWindow window;
  bool drop_zero_edges = false;
  // Keep only records located in this state (within-state networks).
  std::optional<std::string> state;
};

struct BuildReport {
  std::size_t records = 0;
  std::size_t used = 0;
  std::size_t untyped = 0;
  std::size_t unknown_party = 0;
  std::size_t outside_window = 0;
  std::size_t self_pairs = 0;
};

inline Json to_json(const BuildReport& r) {
  return Json{{"records", r.records},         {"used", r.used},
              {"untyped", r.untyped},         {"unknown_party", r.unknown_party},
              {"outside_window", r.outside_window}, {"self_pairs", r.self_pairs}};
}

/// Signed graph over party-attributed people; pair weight = sum of type weights.
inline SignedGraph build_graph(const std::vector<InteractionRecord>& records, const AttributeTable& attrs,
                               const GraphOptions& options = {}, BuildReport* report = nullptr) {
  BuildReport rep;
  SignedGraph g;
  for (const auto& r : records) {
    ++rep.records;
    if (!options.window.contains(r.year) || (options.state && r.state != options.state)) {
      ++rep.outside_window;
      continue;
    }
    if (!r.type) {
      ++rep.untyped;
      continue;
    }
    const auto* a1 = attrs.find(r.person1.id ? *r.person1.id : r.person1.surface);
    const auto* a2 = attrs.find(r.person2.id ? *r.person2.id : r.person2.surface);
    if (!a1 || !a2 || !a1->party || !a2->party) {
      ++rep.unknown_party;
      continue;
    }
    const std::string k1 = person_key(r.person1), k2 = person_key(r.person2);
    if (k1 == k2) {
      ++rep.self_pairs;
      continue;
    }
    const std::size_t u = g.add_node(k1, *a1);
    const std::size_t v = g.add_node(k2, *a2);
    g.add_edge(u, v, type_weight(*r.type), r.record_id);
    ++rep.used;
  }
  if (options.drop_zero_edges) g.remove_zero_edges();
  if (report) *report = rep;
  return g;
}

/// Community id per node from the party attribute (sorted party names -> 0, 1, ...).
inline std::vector<int> party_partition(const SignedGraph& g) {
  std::set<std::string> parties;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& p = g.attributes(i).party;
    if (!p) throw Error("node " + g.id(i) + " has no party");
    parties.insert(*p);
  }
  std::map<std::string, int> ids;
  for (const auto& p : parties) ids.emplace(p, static_cast<int>(ids.size()));
  std::vector<int> out;
  for (std::size_t i = 0; i < g.node_count(); ++i) out.push_back(ids.at(*g.attributes(i).party));
  return out;
}

enum class SignedMode { Verbatim, Gomez };

namespace detail {

struct CommunityTotals {
  double two_m = 0;
  std::map<int, double> internal;  // sum of A_ij over ordered pairs inside a community
  std::map<int, double> strength;  // sum of k_i inside a community
};

inline CommunityTotals community_totals(const SignedGraph& g, const std::vector<int>& part,
                                        const std::function<double(double)>& w_of) {
  CommunityTotals t;
  for (const auto& e : g.edges()) {
    const double w = w_of(e.weight);
    t.two_m += 2.0 * w;
    t.strength[part[e.u]] += w;
    t.strength[part[e.v]] += w;
    if (part[e.u] == part[e.v]) t.internal[part[e.u]] += 2.0 * w;
  }
  return t;
}

inline double newman_q(const CommunityTotals& t) {
  double q = 0;
  for (const auto& [c, k] : t.strength) {
    auto it = t.internal.find(c);
    const double in = it == t.internal.end() ? 0.0 : it->second;
    q += in / t.two_m - (k / t.two_m) * (k / t.two_m);
  }
  return q;
}

}  // namespace detail

/// Newman modularity of `partition`. Verbatim mode applies the formula to the
/// signed weights as they are; Gomez mode combines positive and negative parts.
inline double modularity(const SignedGraph& g, const std::vector<int>& partition,
                         SignedMode mode = SignedMode::Verbatim) {
  if (partition.size() != g.node_count()) throw Error("partition size does not match node count");
  if (mode == SignedMode::Verbatim) {
    const auto t = detail::community_totals(g, partition, [](double w) { return w; });
    if (std::abs(t.two_m) < 1e-12) throw Error("degenerate graph: total edge weight is zero");
    return detail::newman_q(t);
  }
  const auto pos = detail::community_totals(g, partition, [](double w) { return std::max(w, 0.0); });
  const auto neg = detail::community_totals(g, partition, [](double w) { return std::max(-w, 0.0); });
  const double denom = pos.two_m + neg.two_m;
  if (denom < 1e-12) throw Error("degenerate graph: total edge weight is zero");
  const double qp = pos.two_m > 0 ? detail::newman_q(pos) : 0.0;
  const double qn = neg.two_m > 0 ? detail::newman_q(neg) : 0.0;
  return (pos.two_m * qp - neg.two_m * qn) / denom;
}

struct NullSample {
  SignedGraph graph;
  std::size_t accepted_swaps = 0;
  std::size_t attempts = 0;
  std::optional<std::string> warning;
};

/// Degree-preserving double-edge swaps (target `swap_factor * |E|` accepted
/// swaps) followed by a uniform permutation of the weight multiset.
inline NullSample randomize_null(const SignedGraph& g, std::uint64_t seed, std::size_t swap_factor = 10) {
  if (g.edge_count() < 2) throw Error("null model needs at least two edges");
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::unordered_set<std::uint64_t> present;
  auto key = [](std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  };
  for (const auto& e : g.edges()) {
    edges.emplace_back(e.u, e.v);
    present.insert(key(e.u, e.v));
  }
  const std::size_t target = swap_factor * edges.size();
  const std::size_t max_attempts = 100 * target + 1000;
  NullSample out{g, 0, 0, std::nullopt};
  while (out.accepted_swaps < target && out.attempts < max_attempts) {
    ++out.attempts;
    const std::size_t i = rng.below(edges.size());
    const std::size_t j = rng.below(edges.size());
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (rng.below(2) == 1) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == d || c == b) continue;
    if (present.count(key(a, d)) || present.count(key(c, b))) continue;
    present.erase(key(a, b));
    present.erase(key(c, d));
    present.insert(key(a, d));
    present.insert(key(c, b));
    edges[i] = {a, d};
    edges[j] = {c, b};
    ++out.accepted_swaps;
  }
  if (out.accepted_swaps == 0) {
    out.warning = "no degree-preserving swap is possible; only weights were permuted";
  } else if (out.accepted_swaps < target) {
    out.warning = "accepted " + std::to_string(out.accepted_swaps) + " of " + std::to_string(target) + " swaps";
  }
  std::vector<double> weights = g.weights();
  rng.shuffle(weights);
  std::vector<GraphEdge> new_edges;
  new_edges.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) new_edges.push_back({edges[i].first, edges[i].second, weights[i], {}});
  std::sort(new_edges.begin(), new_edges.end(),
            [](const GraphEdge& x, const GraphEdge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
  out.graph.set_edges(std::move(new_edges));
  return out;
}

/// Pairwise summation in a fixed reduction order.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.subspan(0, h)) + pairwise_sum(x.subspan(h));
}

struct ModularityReport {
  double q_original = 0;
  std::size_t samples = 0;
  double mu = 0;
  double sigma = 0;
  double z = 0;
  std::uint64_t master_seed = 0;
  std::size_t warnings = 0;
};

inline Json to_json(const ModularityReport& r) {
  return Json{{"Q_original", r.q_original}, {"N", r.samples}, {"mu", r.mu},
              {"sigma", r.sigma},           {"Z", r.z},       {"master_seed", r.master_seed},
              {"null_warnings", r.warnings}};
}

/// Z-score of the observed modularity against N degree- and weight-preserving
/// null samples; sample i uses seed derive_seed(master_seed, i). sigma is the
/// sample standard deviation. Output does not depend on `threads`.
inline ModularityReport standardized_modularity(const SignedGraph& g, const std::vector<int>& partition,
                                                std::size_t n = 1000, std::uint64_t master_seed = 0,
                                                SignedMode mode = SignedMode::Verbatim, std::size_t threads = 1) {
  if (n < 2) throw Error("standardized modularity needs N >= 2");
  ModularityReport r;
  r.samples = n;
  r.master_seed = master_seed;
  r.q_original = modularity(g, partition, mode);
  std::vector<double> q(n);
  std::vector<char> warned(n, 0);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      const auto s = randomize_null(g, derive_seed(master_seed, i));
      q[i] = modularity(s.graph, partition, mode);
      warned[i] = s.warning ? 1 : 0;
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& t : pool) t.join();
  }
  if (std::all_of(q.begin(), q.end(), [&](double v) { return v == q[0]; })) {
    throw Error("degenerate null distribution: sigma = 0");
  }
  r.mu = pairwise_sum(q) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (q[i] - r.mu) * (q[i] - r.mu);
  r.sigma = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
  for (char w : warned) r.warnings += static_cast<std::size_t>(w);
  if (r.sigma == 0.0) throw Error("degenerate null distribution: sigma = 0");
  r.z = (r.q_original - r.mu) / r.sigma;
  return r;
}

// ---------------------------------------------------------------------------
// Trends

enum class TrendBin { Decade, Year };

struct TrendRow {
  int bin = 0;  // first year of the bin
  std::size_t total = 0;
  std::size_t inter_party = 0;
  std::optional<double> inter_share;
  std::optional<double> adversarial;  // shares among inter-party interactions
  std::optional<double> cooperative;
  std::optional<double> neutral;
};

struct TrendSeries {
  TrendBin bin = TrendBin::Decade;
  std::vector<TrendRow> rows;
  std::size_t excluded = 0;  // untyped, unknown party, or no year
};

inline int bin_start(int year, TrendBin bin) {
  if (bin == TrendBin::Year) return year;
  return year >= 0 ? year / 10 * 10 : -((-year + 9) / 10 * 10);
}

inline TrendSeries trend_ratios(const std::vector<InteractionRecord>& records, const AttributeTable& attrs,
                                TrendBin bin = TrendBin::Decade, YearWindow window = {}) {
  TrendSeries s;
  s.bin = bin;
  struct Tally {
    std::size_t total = 0, inter = 0;
    std::map<InteractionType, std::size_t> types;
  };
  std::map<int, Tally> bins;
  for (const auto& r : records) {
    const auto* a1 = attrs.find(r.person1.id ? *r.person1.id : r.person1.surface);
    const auto* a2 = attrs.find(r.person2.id ? *r.person2.id : r.person2.surface);
    if (!r.type || !r.year || !a1 || !a2 || !a1->party || !a2->party) {
      ++s.excluded;
      continue;
    }
    if (!window.contains(r.year)) continue;
    auto& t = bins[bin_start(*r.year, bin)];
    ++t.total;
    if (*a1->party != *a2->party) {
      ++t.inter;
      ++t.types[*r.type];
    }
  }
  if (bins.empty() && !(window.from && window.to)) return s;
  const int step = bin == TrendBin::Year ? 1 : 10;
  const int lo = window.from ? bin_start(*window.from, bin) : bins.begin()->first;
  const int hi = window.to ? bin_start(*window.to, bin) : bins.rbegin()->first;
  for (int b = lo; b <= hi; b += step) {
    TrendRow row;
    row.bin = b;
    if (auto it = bins.find(b); it != bins.end()) {
      const auto& t = it->second;
      row.total = t.total;
      row.inter_party = t.inter;
      row.inter_share = static_cast<double>(t.inter) / static_cast<double>(t.total);
      if (t.inter > 0) {
        auto share = [&](InteractionType ty) {
          auto jt = t.types.find(ty);
          return static_cast<double>(jt == t.types.end() ? 0 : jt->second) / static_cast<double>(t.inter);
        };
        row.adversarial = share(InteractionType::Adversarial);
        row.cooperative = share(InteractionType::Cooperative);
        row.neutral = share(InteractionType::Neutral);
      }
    }
    s.rows.push_back(row);
  }
  return s;
}

inline std::string opt_csv(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline std::string trend_csv(const TrendSeries& s) {
  std::ostringstream out;
  out << "bin,total,inter_party,inter_share,adversarial,cooperative,neutral\n";
  for (const auto& r : s.rows) {
    out << r.bin << ',' << r.total << ',' << r.inter_party << ',' << opt_csv(r.inter_share) << ','
        << opt_csv(r.adversarial) << ',' << opt_csv(r.cooperative) << ',' << opt_csv(r.neutral) << '\n';
  }
  return out.str();
}

struct TypeTable {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // type -> (intra, inter)
};

inline TypeTable type_table(const std::vector<InteractionRecord>& records, const AttributeTable& attrs) {
  TypeTable t;
  for (auto ty : {InteractionType::Cooperative, InteractionType::Adversarial, InteractionType::Neutral}) {
    t.counts[std::string(type_name(ty))] = {0, 0};
  }
  for (const auto& r : records) {
    const auto* a1 = attrs.find(r.person1.id ? *r.person1.id : r.person1.surface);
    const auto* a2 = attrs.find(r.person2.id ? *r.person2.id : r.person2.surface);
    if (!r.type || !a1 || !a2 || !a1->party || !a2->party) continue;
    auto& c = t.counts[std::string(type_name(*r.type))];
    (*a1->party == *a2->party ? c.first : c.second) += 1;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Distance

inline constexpr double kEarthRadiusKm = 6371.0;

inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Sum of great-circle distances from the location to both birthplaces.
inline std::optional<double> interaction_distance(const std::optional<GeoPoint>& location,
                                                  const std::optional<GeoPoint>& birthplace1,
                                                  const std::optional<GeoPoint>& birthplace2) {
  if (!location || !birthplace1 || !birthplace2) return std::nullopt;
  return haversine_km(*location, *birthplace1) + haversine_km(*location, *birthplace2);
}

struct DistanceRow {
  int bin = 0;
  std::size_t count = 0;
  std::optional<double> mean_km;
};

inline std::vector<DistanceRow> distance_series(const std::vector<InteractionRecord>& records,
                                                const AttributeTable& attrs, TrendBin bin = TrendBin::Decade,
                                                std::size_t* missing = nullptr) {
  std::map<int, std::pair<std::size_t, double>> acc;
  std::size_t miss = 0;
  for (const auto& r : records) {
    const auto* a1 = attrs.find(r.person1.id ? *r.person1.id : r.person1.surface);
    const auto* a2 = attrs.find(r.person2.id ? *r.person2.id : r.person2.surface);
    const auto d = interaction_distance(r.geo, a1 ? a1->birthplace : std::nullopt, a2 ? a2->birthplace : std::nullopt);
    if (!d || !r.year) {
      ++miss;
      continue;
    }
    auto& [n, sum] = acc[bin_start(*r.year, bin)];
    ++n;
    sum += *d;
  }
  if (missing) *missing = miss;
  std::vector<DistanceRow> out;
  if (acc.empty()) return out;
  const int step = bin == TrendBin::Year ? 1 : 10;
  for (int b = acc.begin()->first; b <= acc.rbegin()->first; b += step) {
    DistanceRow row{b, 0, std::nullopt};
    if (auto it = acc.find(b); it != acc.end()) {
      row.count = it->second.first;
      row.mean_km = it->second.second / static_cast<double>(it->second.first);
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph statistics

/// 3 * triangles / connected triples on the unweighted skeleton; null without triples.
inline std::optional<double> clustering_coefficient(const SignedGraph& g) {
  std::vector<std::set<std::size_t>> nb(g.node_count());
  for (const auto& e : g.edges()) {
    nb[e.u].insert(e.v);
    nb[e.v].insert(e.u);
  }
  std::size_t triangles = 0;
  double triads = 0;
  for (const auto& e : g.edges()) {
    const auto& a = nb[e.u];
    const auto& b = nb[e.v];
    for (std::size_t w : a) {
      if (w > e.v && b.count(w)) ++triangles;  // each triangle counted once at (u<v<w)
    }
  }
  for (const auto& s : nb) {
    const double k = static_cast<double>(s.size());
    triads += k * (k - 1) / 2;
  }
  if (triads == 0) return std::nullopt;
  return 3.0 * static_cast<double>(triangles) / triads;
}

struct PowerLawFit {
  std::optional<double> alpha;
  std::size_t n = 0;
  int k_min = 2;
};

/// Discrete power-law exponent: alpha = 1 + n / sum(ln(k_i / (k_min - 0.5))) over k_i >= k_min.
inline PowerLawFit fit_power_law(std::span<const std::size_t> degrees, int k_min = 2) {
  if (k_min < 1) throw Error("k_min must be at least 1");
  PowerLawFit f;
  f.k_min = k_min;
  double s = 0;
  for (std::size_t k : degrees) {
    if (static_cast<int>(k) >= k_min) {
      ++f.n;
      s += std::log(static_cast<double>(k) / (k_min - 0.5));
    }
  }
  if (f.n > 0 && s > 0) f.alpha = 1.0 + static_cast<double>(f.n) / s;
  return f;
}

/// PageRank on absolute edge weights; dangling mass is spread uniformly.
inline std::vector<double> pagerank(const SignedGraph& g, double damping = 0.85, double tol = 1e-10,
                                    std::size_t max_iter = 1000) {
  const std::size_t n = g.node_count();
  if (n == 0) return {};
  std::vector<double> out_w(n, 0.0);
  for (const auto& e : g.edges()) {
    out_w[e.u] += std::abs(e.weight);
    out_w[e.v] += std::abs(e.weight);
  }
  std::vector<double> pr(n, 1.0 / static_cast<double>(n)), next(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    double dangling = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out_w[i] == 0) dangling += pr[i];
    }
    const double base = (1.0 - damping) / static_cast<double>(n) + damping * dangling / static_cast<double>(n);
    std::fill(next.begin(), next.end(), base);
    for (const auto& e : g.edges()) {
      const double w = std::abs(e.weight);
      if (w == 0) continue;
      next[e.v] += damping * pr[e.u] * w / out_w[e.u];
      next[e.u] += damping * pr[e.v] * w / out_w[e.v];
    }
    double diff = 0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - pr[i]);
    pr.swap(next);
    if (diff < tol) break;
  }
  return pr;
}

struct GraphStats {
  std::map<std::size_t, std::size_t> degree_histogram;
  std::optional<double> clustering;
  PowerLawFit power_law;
  std::vector<double> pagerank;
};

inline GraphStats graph_stats(const SignedGraph& g, int k_min = 2) {
  if (g.node_count() == 0) throw Error("graph has no nodes");
  GraphStats s;
  const auto deg = g.degrees();
  for (std::size_t k : deg) ++s.degree_histogram[k];
  s.clustering = clustering_coefficient(g);
  s.power_law = fit_power_law(deg, k_min);
  s.pagerank = pagerank(g);
  return s;
}

// ---------------------------------------------------------------------------
// Polarization series and exports

struct PolarizationPoint {
  std::string label;  // year or state
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::optional<ModularityReport> report;
  std::string note;  // why the point is null
};

struct PolarizationOptions {
  std::size_t samples = 1000;
  std::uint64_t master_seed = 0;
  SignedMode mode = SignedMode::Verbatim;
  bool drop_zero_edges = false;
  std::size_t threads = 1;
};

inline PolarizationPoint polarization_point(const std::string& label, const SignedGraph& g,
                                            const PolarizationOptions& o) {
  PolarizationPoint p{label, g.node_count(), g.edge_count(), std::nullopt, ""};
  if (g.edge_count() < 2) {
    p.note = "fewer than two edges";
    return p;
  }
  try {
    p.report = standardized_modularity(g, party_partition(g), o.samples, o.master_seed, o.mode, o.threads);
  } catch (const Error& e) {
    p.note = e.what();
  }
  return p;
}

/// Per-year (or cumulative up to each year) party-partition Z series.
inline std::vector<PolarizationPoint> annual_polarization(const std::vector<InteractionRecord>& records,
                                                          const AttributeTable& attrs, int from, int to,
                                                          bool cumulative, const PolarizationOptions& o) {
  std::vector<PolarizationPoint> out;
  for (int y = from; y <= to; ++y) {
    GraphOptions go;
    go.window = cumulative ? YearWindow{from, y} : YearWindow{y, y};
    go.drop_zero_edges = o.drop_zero_edges;
    out.push_back(polarization_point(std::to_string(y), build_graph(records, attrs, go), o));
  }
  return out;
}

/// Within-state networks: records whose location resolves to each state.
inline std::vector<PolarizationPoint> state_polarization(const std::vector<InteractionRecord>& records,
                                                         const AttributeTable& attrs, YearWindow window,
                                                         const PolarizationOptions& o) {
  std::set<std::string> states;
  for (const auto& r : records) {
    if (r.state) states.insert(*r.state);
  }
  std::vector<PolarizationPoint> out;
  for (const auto& s : states) {
    GraphOptions go;
    go.window = window;
    go.state = s;
    go.drop_zero_edges = o.drop_zero_edges;
    out.push_back(polarization_point(s, build_graph(records, attrs, go), o));
  }
  return out;
}

inline std::string polarization_csv(const std::vector<PolarizationPoint>& points) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "label,nodes,edges,Q,mu,sigma,Z,note\n";
  for (const auto& p : points) {
    out << p.label << ',' << p.nodes << ',' << p.edges << ',';
    if (p.report) out << p.report->q_original << ',' << p.report->mu << ',' << p.report->sigma << ',' << p.report->z;
    else out << ",,,";
    out << ',' << p.note << '\n';
  }
  return out.str();
}

inline std::string edge_csv(const SignedGraph& g) {
  std::ostringstream out;
  out << "source,target,weight,records\n";
  for (const auto& e : g.edges()) {
    out << '"' << g.id(e.u) << "\",\"" << g.id(e.v) << "\"," << e.weight << ',' << e.provenance.size() << '\n';
  }
  return out.str();
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string to_gexf(const SignedGraph& g) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n"
      << "  <graph defaultedgetype=\"undirected\">\n"
      << "    <attributes class=\"node\">\n"
      << "      <attribute id=\"0\" title=\"party\" type=\"string\"/>\n"
      << "      <attribute id=\"1\" title=\"state\" type=\"string\"/>\n"
      << "      <attribute id=\"2\" title=\"profession\" type=\"string\"/>\n"
      << "    </attributes>\n    <nodes>\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& a = g.attributes(i);
    out << "      <node id=\"" << i << "\" label=\"" << xml_escape(a.person) << "\"><attvalues>"
        << "<attvalue for=\"0\" value=\"" << xml_escape(a.party.value_or("")) << "\"/>"
        << "<attvalue for=\"1\" value=\"" << xml_escape(a.state.value_or("")) << "\"/>"
        << "<attvalue for=\"2\" value=\"" << xml_escape(a.profession.value_or("")) << "\"/>"
        << "</attvalues></node>\n";
  }
  out << "    </nodes>\n    <edges>\n";
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const auto& e = g.edges()[i];
    out << "      <edge id=\"" << i << "\" source=\"" << e.u << "\" target=\"" << e.v << "\" weight=\"" << e.weight
        << "\"/>\n";
  }
  out << "    </edges>\n  </graph>\n</gexf>\n";
  return out.str();
}

}  // namespace falcon
