#pragma once

// Documents -> segments, and trajectory triples -> candidate quadruples.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "falcon/jsonio.hpp"

namespace falcon {

struct SegmentPolicy {
  std::size_t max_chars = 2000;
};

/// Paragraph spans: maximal runs of text separated by blank lines.
inline std::vector<Span> paragraph_spans(std::string_view text) {
  std::vector<Span> out;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    while (pos < n && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= n) break;
    const std::size_t start = pos;
    std::size_t end = pos;
    while (pos < n) {
      const std::size_t eol = text.find('\n', pos);
      const std::size_t line_end = eol == std::string_view::npos ? n : eol;
      const std::string_view line = text.substr(pos, line_end - pos);
      if (trim(line).empty()) break;
      std::size_t last = line_end;
      while (last > pos && std::isspace(static_cast<unsigned char>(text[last - 1]))) --last;
      end = last;
      pos = eol == std::string_view::npos ? n : eol + 1;
    }
    out.push_back({start, end});
  }
  return out;
}

/// Greedy paragraph merge: a paragraph joins the current segment while the
/// merged slice stays within max_chars. Oversized paragraphs stand alone.
inline std::vector<TextSegment> segment_document(const Document& doc,
                                                 const SegmentPolicy& policy = {}) {
  std::vector<TextSegment> segments;
  const auto paragraphs = paragraph_spans(doc.text);
  std::size_t prev_end = 0;
  auto emit = [&](Span s) {
    TextSegment seg;
    seg.segment_id = doc.doc_id + ":" + std::to_string(segments.size());
    seg.doc_id = doc.doc_id;
    seg.char_start = s.start;
    seg.char_end = s.end;
    seg.text = doc.text.substr(s.start, s.end - s.start);
    seg.separator = doc.text.substr(prev_end, s.start - prev_end);
    prev_end = s.end;
    segments.push_back(std::move(seg));
  };
  std::optional<Span> current;
  for (const Span& p : paragraphs) {
    if (current && p.end - current->start <= policy.max_chars) {
      current->end = p.end;
      continue;
    }
    if (current) emit(*current);
    current = p;
  }
  if (current) emit(*current);
  return segments;
}

/// Inverse of segmentation: separators + segment texts + trailing remainder.
inline std::string reconstruct(const Document& doc, const std::vector<TextSegment>& segments) {
  std::string out;
  std::size_t end = 0;
  for (const auto& s : segments) {
    out += s.separator;
    out += s.text;
    end = s.char_end;
  }
  out += doc.text.substr(end);
  return out;
}

inline Document read_text_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Document d;
  d.doc_id = path.stem().string();
  d.title = d.doc_id;
  d.text = ss.str();
  d.source = Source::Fixture;
  return d;
}

/// Loads *.txt (one document per file, id = file stem) and *.jsonl
/// ({doc_id, title, text, source} per line) from a directory, sorted by doc_id.
inline std::vector<Document> load_documents(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) {
    if (f.extension() == ".txt") {
      docs.push_back(read_text_document(f));
    } else if (f.extension() == ".jsonl") {
      std::ifstream in(f);
      std::string line;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const Json j = Json::parse(line);
        Document d;
        d.doc_id = j.at("doc_id").get<std::string>();
        d.title = j.value("title", d.doc_id);
        d.text = j.at("text").get<std::string>();
        d.source = parse_source(j.value("source", std::string("fixture")));
        docs.push_back(std::move(d));
      }
    }
  }
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].doc_id == docs[i - 1].doc_id) throw Error("duplicate doc_id " + docs[i].doc_id);
  }
  return docs;
}

namespace detail {

inline std::vector<Span> merge_occurrences(const std::vector<Span>& a, const std::vector<Span>& b) {
  std::vector<Span> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  std::vector<Span> out;
  for (const Span& s : all) {
    if (!out.empty() && out.back().overlaps(s)) continue;
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

/// Every unordered pair of triples with distinct persons and equal normalized
/// time and location surfaces yields one quadruple. Output is deduplicated and
/// sorted by quadruple key, so it does not depend on input order.
inline std::vector<CandidateQuadruple> pair_candidates(const std::vector<TrajectoryTriple>& triples) {
  std::map<std::string, CandidateQuadruple> unique;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    for (std::size_t j = i + 1; j < triples.size(); ++j) {
      const TrajectoryTriple* a = &triples[i];
      const TrajectoryTriple* b = &triples[j];
      const std::string pa = normalize_surface(a->person.surface);
      const std::string pb = normalize_surface(b->person.surface);
      if (pa == pb) continue;
      if (normalize_surface(a->time.surface) != normalize_surface(b->time.surface)) continue;
      if (normalize_surface(a->location.surface) != normalize_surface(b->location.surface)) continue;
      if (pb < pa) std::swap(a, b);

      CandidateQuadruple q;
      q.segment = a->segment;
      q.person1 = a->person;
      q.person1.role = Role::Person1;
      q.person2 = b->person;
      q.person2.role = Role::Person2;
      q.time = a->time;
      q.time.occurrences = detail::merge_occurrences(a->time.occurrences, b->time.occurrences);
      q.location = a->location;
      q.location.occurrences =
          detail::merge_occurrences(a->location.occurrences, b->location.occurrences);
      // Smaller surface wins so the choice is independent of input order.
      if (b->time.surface < q.time.surface) q.time.surface = b->time.surface;
      if (b->location.surface < q.location.surface) q.location.surface = b->location.surface;

      std::string key = quadruple_key(q);
      auto it = unique.find(key);
      if (it == unique.end()) {
        unique.emplace(std::move(key), std::move(q));
      } else {
        auto& existing = it->second;
        existing.person1.occurrences =
            detail::merge_occurrences(existing.person1.occurrences, q.person1.occurrences);
        existing.person2.occurrences =
            detail::merge_occurrences(existing.person2.occurrences, q.person2.occurrences);
        existing.time.occurrences =
            detail::merge_occurrences(existing.time.occurrences, q.time.occurrences);
        existing.location.occurrences =
            detail::merge_occurrences(existing.location.occurrences, q.location.occurrences);
      }
    }
  }
  std::vector<CandidateQuadruple> out;
  out.reserve(unique.size());
  for (auto& [k, q] : unique) out.push_back(std::move(q));
  return out;
}

/// Groups triples by (doc_id, segment_id) in sorted order.
inline std::map<std::pair<std::string, std::string>, std::vector<TrajectoryTriple>>
group_by_segment(const std::vector<TrajectoryTriple>& triples) {
  std::map<std::pair<std::string, std::string>, std::vector<TrajectoryTriple>> groups;
  for (const auto& t : triples) groups[{t.segment.doc_id, t.segment.segment_id}].push_back(t);
  return groups;
}

/// Fraction of gold quadruples whose identity appears among produced ones.
inline double audit_coverage(const std::vector<CandidateQuadruple>& gold,
                             const std::vector<CandidateQuadruple>& produced) {
  if (gold.empty()) throw Error("undefined coverage: gold set is empty");
  std::set<std::string> have;
  for (const auto& q : produced) have.insert(quadruple_key(q));
  std::size_t hit = 0;
  for (const auto& q : gold) hit += have.count(quadruple_key(q));
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

struct IngestReport {
  std::size_t documents = 0;
  std::size_t triples = 0;
  std::size_t candidates = 0;
  std::vector<LineError> triple_errors;
  std::vector<std::string> segment_mismatches;
};

/// Checks triples against their source documents, then pairs them per segment.
/// Triples whose segment does not match the document slice are dropped and reported.
inline std::vector<CandidateQuadruple> ingest(const std::vector<Document>& docs,
                                              const LoadResult<TrajectoryTriple>& loaded,
                                              IngestReport& report) {
  std::map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id[d.doc_id] = &d;
  report.documents = docs.size();
  report.triples = loaded.items.size();
  report.triple_errors = loaded.errors;

  std::vector<TrajectoryTriple> accepted;
  for (const auto& t : loaded.items) {
    auto it = by_id.find(t.segment.doc_id);
    if (it == by_id.end()) {
      report.segment_mismatches.push_back(t.segment.segment_id + ": unknown document");
      continue;
    }
    const std::string& text = it->second->text;
    if (t.segment.char_end > text.size() ||
        text.compare(t.segment.char_start, t.segment.char_end - t.segment.char_start,
                     t.segment.text) != 0) {
      report.segment_mismatches.push_back(t.segment.segment_id +
                                          ": segment text differs from document slice");
      continue;
    }
    accepted.push_back(t);
  }
  std::vector<CandidateQuadruple> out;
  for (const auto& [key, group] : group_by_segment(accepted)) {
    auto qs = pair_candidates(group);
    out.insert(out.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
  }
  report.candidates = out.size();
  return out;
}

}  // namespace falcon
