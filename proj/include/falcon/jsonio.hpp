#pragma once

// JSONL envelopes for triples, candidates and labeled records.

#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "falcon/types.hpp"

namespace falcon {

using Json = nlohmann::ordered_json;

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <class T>
struct LoadResult {
  std::vector<T> items;
  std::vector<LineError> errors;
};

inline Json mention_to_json(const EntityMention& m) {
  Json j;
  j["surface"] = m.surface;
  Json occ = Json::array();
  for (const Span& s : m.occurrences) occ.push_back({s.start, s.end});
  j["occurrences"] = std::move(occ);
  if (m.id) j["id"] = *m.id;
  return j;
}

inline EntityMention mention_from_json(const Json& j, Role role) {
  EntityMention m;
  m.role = role;
  m.surface = j.at("surface").get<std::string>();
  for (const auto& o : j.at("occurrences")) {
    if (!o.is_array() || o.size() != 2) throw Error("occurrence must be a [start, end] pair");
    m.occurrences.push_back({o[0].get<std::size_t>(), o[1].get<std::size_t>()});
  }
  if (j.contains("id") && !j["id"].is_null()) m.id = j["id"].get<std::string>();
  return m;
}

inline void write_envelope(Json& j, const TextSegment& s) {
  j["doc_id"] = s.doc_id;
  j["segment_id"] = s.segment_id;
  j["segment_text"] = s.text;
  j["char_start"] = s.char_start;
  j["char_end"] = s.char_end;
}

inline TextSegment read_envelope(const Json& j) {
  TextSegment s;
  s.doc_id = j.at("doc_id").get<std::string>();
  s.segment_id = j.at("segment_id").get<std::string>();
  s.text = j.at("segment_text").get<std::string>();
  s.char_start = j.at("char_start").get<std::size_t>();
  s.char_end = j.at("char_end").get<std::size_t>();
  return s;
}

inline Json to_json(const TrajectoryTriple& t) {
  Json j;
  write_envelope(j, t.segment);
  j["person"] = mention_to_json(t.person);
  j["time"] = mention_to_json(t.time);
  j["location"] = mention_to_json(t.location);
  if (t.label) j["y_tra"] = *t.label;
  return j;
}

inline TrajectoryTriple triple_from_json(const Json& j) {
  TrajectoryTriple t;
  t.segment = read_envelope(j);
  t.person = mention_from_json(j.at("person"), Role::Person);
  t.time = mention_from_json(j.at("time"), Role::Time);
  t.location = mention_from_json(j.at("location"), Role::Location);
  if (j.contains("y_tra")) t.label = j["y_tra"].get<int>();
  return t;
}

inline Json to_json(const CandidateQuadruple& q) {
  Json j;
  write_envelope(j, q.segment);
  j["person1"] = mention_to_json(q.person1);
  j["person2"] = mention_to_json(q.person2);
  j["time"] = mention_to_json(q.time);
  j["location"] = mention_to_json(q.location);
  return j;
}

inline CandidateQuadruple candidate_from_json(const Json& j) {
  CandidateQuadruple q;
  q.segment = read_envelope(j);
  q.person1 = mention_from_json(j.at("person1"), Role::Person1);
  q.person2 = mention_from_json(j.at("person2"), Role::Person2);
  q.time = mention_from_json(j.at("time"), Role::Time);
  q.location = mention_from_json(j.at("location"), Role::Location);
  return q;
}

/// Reads a JSONL file line by line. Parse/validation failures of single lines
/// are collected; an unreadable file throws.
template <class T>
LoadResult<T> load_jsonl(const std::string& path,
                         const std::function<T(const Json&)>& parse,
                         const std::function<std::optional<std::string>(const T&)>& check) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  LoadResult<T> result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      T item = parse(Json::parse(line));
      if (auto err = check(item)) {
        result.errors.push_back({lineno, *err});
        continue;
      }
      result.items.push_back(std::move(item));
    } catch (const std::exception& e) {
      result.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

inline LoadResult<TrajectoryTriple> load_triples(const std::string& path) {
  return load_jsonl<TrajectoryTriple>(
      path, triple_from_json,
      [](const TrajectoryTriple& t) { return validate(t); });
}

inline LoadResult<CandidateQuadruple> load_candidates(const std::string& path) {
  return load_jsonl<CandidateQuadruple>(
      path, candidate_from_json,
      [](const CandidateQuadruple& q) { return validate(q); });
}

template <class T>
void write_jsonl(std::ostream& out, const std::vector<T>& items) {
  for (const T& item : items) out << to_json(item).dump() << '\n';
}

template <class T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, items);
}

}  // namespace falcon
