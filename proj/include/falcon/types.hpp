#pragma once

// Core text-level domain types shared by ingest, dataset and the encoder.

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "falcon/common.hpp"

namespace falcon {

enum class Role { Person1, Person2, Person, Time, Location };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::Person1: return "Person1";
    case Role::Person2: return "Person2";
    case Role::Person: return "Person";
    case Role::Time: return "Time";
    case Role::Location: return "Location";
  }
  return "?";
}

enum class Source { Wikipedia, Britannica, Fixture };

inline std::string_view source_name(Source s) {
  switch (s) {
    case Source::Wikipedia: return "wikipedia";
    case Source::Britannica: return "britannica";
    case Source::Fixture: return "fixture";
  }
  return "fixture";
}

inline Source parse_source(std::string_view s) {
  if (s == "wikipedia") return Source::Wikipedia;
  if (s == "britannica") return Source::Britannica;
  if (s == "fixture") return Source::Fixture;
  throw Error("unknown document source: " + std::string(s));
}

/// Half-open character span [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
  Source source = Source::Fixture;
};

struct TextSegment {
  std::string segment_id;
  std::string doc_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string text;
  // Document text between the previous segment (or document start) and this one.
  std::string separator;
};

struct EntityMention {
  Role role = Role::Person;
  std::string surface;
  std::vector<Span> occurrences;
  std::optional<std::string> id;
};

struct TrajectoryTriple {
  TextSegment segment;
  EntityMention person;
  EntityMention time;
  EntityMention location;
  // Present only in labeled trajectory corpora.
  std::optional<int> label;
};

struct CandidateQuadruple {
  TextSegment segment;
  EntityMention person1;
  EntityMention person2;
  EntityMention time;
  EntityMention location;

  std::vector<EntityMention> entities() const { return {person1, person2, time, location}; }
};

inline std::vector<EntityMention> entities_of(const TrajectoryTriple& t) {
  return {t.person, t.time, t.location};
}

/// Validates one mention against its segment; returns an error message or nullopt.
inline std::optional<std::string> validate_mention(const EntityMention& m, std::string_view text) {
  const std::string name(role_name(m.role));
  if (m.occurrences.empty()) return name + ": no occurrences";
  const std::string norm = normalize_surface(m.surface);
  if (norm.empty()) return name + ": empty surface";
  std::vector<Span> sorted = m.occurrences;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Span& s = sorted[i];
    if (s.start >= s.end || s.end > text.size()) {
      return name + ": span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
             ") out of segment bounds";
    }
    if (i > 0 && sorted[i - 1].overlaps(s)) return name + ": overlapping occurrence spans";
    if (normalize_surface(text.substr(s.start, s.end - s.start)) != norm) {
      return name + ": span text '" + std::string(text.substr(s.start, s.end - s.start)) +
             "' does not match surface '" + m.surface + "'";
    }
  }
  return std::nullopt;
}

inline std::optional<std::string> validate_segment(const TextSegment& s) {
  if (s.text.empty()) return "segment text is empty";
  if (s.char_end < s.char_start || s.char_end - s.char_start != s.text.size()) {
    return "segment offsets do not match segment text length";
  }
  return std::nullopt;
}

inline std::optional<std::string> validate(const TrajectoryTriple& t) {
  if (auto e = validate_segment(t.segment)) return e;
  if (t.person.role != Role::Person) return "person mention must have role Person";
  if (t.time.role != Role::Time) return "time mention must have role Time";
  if (t.location.role != Role::Location) return "location mention must have role Location";
  for (const auto* m : {&t.person, &t.time, &t.location}) {
    if (auto e = validate_mention(*m, t.segment.text)) return e;
  }
  if (t.label && *t.label != 0 && *t.label != 1) return "label must be 0 or 1";
  return std::nullopt;
}

inline std::optional<std::string> validate(const CandidateQuadruple& q) {
  if (auto e = validate_segment(q.segment)) return e;
  if (q.person1.role != Role::Person1 || q.person2.role != Role::Person2 ||
      q.time.role != Role::Time || q.location.role != Role::Location) {
    return "quadruple roles must be Person1, Person2, Time, Location";
  }
  if (normalize_surface(q.person1.surface) == normalize_surface(q.person2.surface)) {
    return "person1 and person2 must differ";
  }
  for (const auto* m : {&q.person1, &q.person2, &q.time, &q.location}) {
    if (auto e = validate_mention(*m, q.segment.text)) return e;
  }
  return std::nullopt;
}

/// Identity of a quadruple for dedup and coverage: doc plus normalized surfaces.
inline std::string quadruple_key(const CandidateQuadruple& q) {
  std::string key = q.segment.doc_id;
  for (const auto* m : {&q.person1, &q.person2, &q.time, &q.location}) {
    key += '\x1f';
    key += normalize_surface(m->surface);
  }
  return key;
}

}  // namespace falcon
