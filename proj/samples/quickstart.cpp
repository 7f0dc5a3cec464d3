// Pairs the trajectory triples of one paragraph into interaction candidates,
// then measures party polarization of a toy signed network.

#include <iostream>

#include "falcon/falcon.hpp"

int main(int argc, char** argv) {
  using namespace falcon;
  if (argc < 2) {
    std::cerr << "usage: quickstart <triples.jsonl>\n";
    return 2;
  }

  const auto triples = load_triples(argv[1]).items;
  for (const auto& [key, group] : group_by_segment(triples)) {
    for (const auto& q : pair_candidates(group)) {
      std::cout << key.second << ": (" << q.person1.surface << ", " << q.person2.surface << ", " << q.time.surface
                << ", " << q.location.surface << ")\n";
    }
    break;
  }

  // Two parties, cooperative inside and adversarial across.
  SignedGraph g;
  for (const char* p : {"a", "b", "c", "d", "e", "f"}) {
    NodeAttributes attrs;
    attrs.person = p;
    attrs.party = std::string(p) < "d" ? "Left" : "Right";
    g.add_node(p, attrs);
  }
  g.add_edge(0, 1, 2);
  g.add_edge(1, 2, 1);
  g.add_edge(0, 2, 1);
  g.add_edge(3, 4, 2);
  g.add_edge(4, 5, 1);
  g.add_edge(3, 5, 1);
  g.add_edge(2, 3, -1);
  g.add_edge(0, 5, 1);
  const auto report = standardized_modularity(g, party_partition(g), 500, 1);
  std::cout << to_json(report).dump(2) << "\n";
}
