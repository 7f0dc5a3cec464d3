#pragma once

// Corpus extraction: candidates -> scores -> interaction records, plus
// interaction typing through a pluggable chat-completion client.

#include <chrono>
#include <thread>

#include "falcon/ingest.hpp"
#include "falcon/model.hpp"

namespace falcon {

enum class InteractionType { Adversarial, Cooperative, Neutral };

inline std::string_view type_name(InteractionType t) {
  switch (t) {
    case InteractionType::Adversarial: return "Adversarial";
    case InteractionType::Cooperative: return "Cooperative";
    case InteractionType::Neutral: return "Neutral";
  }
  return "Neutral";
}

inline InteractionType parse_type(std::string_view s) {
  const std::string n = normalize_surface(s);
  if (n == "adversarial") return InteractionType::Adversarial;
  if (n == "cooperative") return InteractionType::Cooperative;
  if (n == "neutral") return InteractionType::Neutral;
  throw Error("unknown interaction type '" + std::string(s) + "'");
}

inline constexpr int kMinYear = 1000;
inline constexpr int kMaxYear = 2024;

/// Year from a time surface: a standalone 3-4 digit number (an "s" suffix as
/// in "1950s" is allowed). Null when absent, BC-dated, or when several
/// different years appear.
inline std::optional<int> normalize_time(std::string_view surface) {
  const std::string s = normalize_surface(surface);
  for (const char* era : {" bc", " bce", " b.c", "bc ", "bce "}) {
    if ((" " + s + " ").find(era) != std::string::npos) return std::nullopt;
  }
  std::optional<int> year;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    const std::size_t len = j - i;
    const bool left_ok = i == 0 || !std::isalpha(static_cast<unsigned char>(s[i - 1]));
    bool right_ok = j == s.size() || !std::isalpha(static_cast<unsigned char>(s[j]));
    if (!right_ok && s[j] == 's' && (j + 1 == s.size() || !std::isalnum(static_cast<unsigned char>(s[j + 1])))) {
      right_ok = true;
    }
    if ((len == 3 || len == 4) && left_ok && right_ok) {
      const int y = std::stoi(s.substr(i, len));
      if (year && *year != y) return std::nullopt;
      year = y;
    }
    i = j;
  }
  return year;
}

struct GeoPoint {
  double lat = 0;
  double lon = 0;
};

struct GazetteerEntry {
  GeoPoint point;
  std::optional<std::string> state;
};

/// Location surface -> coordinates (and optional state), keyed by normalized surface.
class Gazetteer {
 public:
  void add(const std::string& surface, GazetteerEntry e) { entries_[normalize_surface(surface)] = std::move(e); }

  const GazetteerEntry* find(std::string_view surface) const {
    auto it = entries_.find(normalize_surface(surface));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  /// JSONL lines {"surface", "lat", "lon", "state"?}.
  static Gazetteer load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open gazetteer " + path);
    Gazetteer g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        const Json j = Json::parse(line);
        GazetteerEntry e{{j.at("lat").get<double>(), j.at("lon").get<double>()}, std::nullopt};
        if (j.contains("state") && !j["state"].is_null()) e.state = j["state"].get<std::string>();
        g.add(j.at("surface").get<std::string>(), std::move(e));
      } catch (const std::exception& ex) {
        throw Error(path + ":" + std::to_string(lineno) + ": " + ex.what());
      }
    }
    return g;
  }

 private:
  std::map<std::string, GazetteerEntry> entries_;
};

struct PersonRef {
  std::string surface;
  std::optional<std::string> id;
};

struct InteractionRecord {
  std::string record_id;
  PersonRef person1;
  PersonRef person2;
  std::string time_surface;
  std::optional<int> year;
  std::string location;
  std::optional<GeoPoint> geo;
  std::optional<std::string> state;
  double score = 0;
  std::string doc_id;
  std::string segment_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string text;
  std::optional<InteractionType> type;
  std::optional<std::string> type_flag;  // "unparseable" or "unclassified"
};

inline Json to_json(const InteractionRecord& r) {
  auto person = [](const PersonRef& p) {
    Json j{{"surface", p.surface}};
    j["id"] = p.id ? Json(*p.id) : Json(nullptr);
    return j;
  };
  Json j;
  j["record_id"] = r.record_id;
  j["person1"] = person(r.person1);
  j["person2"] = person(r.person2);
  j["time"] = Json{{"surface", r.time_surface}, {"year", r.year ? Json(*r.year) : Json(nullptr)}};
  Json loc{{"surface", r.location}};
  loc["lat"] = r.geo ? Json(r.geo->lat) : Json(nullptr);
  loc["lon"] = r.geo ? Json(r.geo->lon) : Json(nullptr);
  loc["state"] = r.state ? Json(*r.state) : Json(nullptr);
  j["location"] = std::move(loc);
  j["score"] = r.score;
  j["doc_id"] = r.doc_id;
  j["segment_id"] = r.segment_id;
  j["char_start"] = r.char_start;
  j["char_end"] = r.char_end;
  j["text"] = r.text;
  if (r.type) j["interaction_type"] = std::string(type_name(*r.type));
  if (r.type_flag) j["type_flag"] = *r.type_flag;
  return j;
}

inline InteractionRecord record_from_json(const Json& j) {
  auto person = [](const Json& p) {
    PersonRef r{p.at("surface").get<std::string>(), std::nullopt};
    if (p.contains("id") && !p["id"].is_null()) r.id = p["id"].get<std::string>();
    return r;
  };
  InteractionRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.person1 = person(j.at("person1"));
  r.person2 = person(j.at("person2"));
  const Json& t = j.at("time");
  r.time_surface = t.at("surface").get<std::string>();
  if (t.contains("year") && !t["year"].is_null()) r.year = t["year"].get<int>();
  const Json& loc = j.at("location");
  r.location = loc.at("surface").get<std::string>();
  if (loc.contains("lat") && !loc["lat"].is_null() && !loc["lon"].is_null()) {
    r.geo = GeoPoint{loc["lat"].get<double>(), loc["lon"].get<double>()};
  }
  if (loc.contains("state") && !loc["state"].is_null()) r.state = loc["state"].get<std::string>();
  r.score = j.at("score").get<double>();
  r.doc_id = j.value("doc_id", std::string());
  r.segment_id = j.value("segment_id", std::string());
  r.char_start = j.value("char_start", std::size_t{0});
  r.char_end = j.value("char_end", std::size_t{0});
  r.text = j.value("text", std::string());
  if (j.contains("interaction_type") && !j["interaction_type"].is_null()) {
    r.type = parse_type(j["interaction_type"].get<std::string>());
  }
  if (j.contains("type_flag")) r.type_flag = j["type_flag"].get<std::string>();
  if (r.year && (*r.year < kMinYear || *r.year > kMaxYear)) throw Error("year outside [1000, 2024]");
  return r;
}

inline LoadResult<InteractionRecord> load_records(const std::string& path) {
  return load_jsonl<InteractionRecord>(path, record_from_json, [](const InteractionRecord&) {
    return std::optional<std::string>();
  });
}

inline InteractionRecord make_record(const CandidateQuadruple& q, double score, std::size_t index,
                                     const Gazetteer* gazetteer) {
  InteractionRecord r;
  r.record_id = q.segment.segment_id + "#" + std::to_string(index);
  r.person1 = {q.person1.surface, q.person1.id};
  r.person2 = {q.person2.surface, q.person2.id};
  r.time_surface = q.time.surface;
  r.year = normalize_time(q.time.surface);
  if (r.year && (*r.year < kMinYear || *r.year > kMaxYear)) r.year.reset();
  r.location = q.location.surface;
  if (gazetteer) {
    if (const auto* g = gazetteer->find(q.location.surface)) {
      r.geo = g->point;
      r.state = g->state;
    }
  }
  r.score = score;
  r.doc_id = q.segment.doc_id;
  r.segment_id = q.segment.segment_id;
  r.char_start = q.segment.char_start;
  r.char_end = q.segment.char_end;
  r.text = q.segment.text;
  return r;
}

struct ExtractOptions {
  double threshold = 0.5;
  bool resume = false;
  const Gazetteer* gazetteer = nullptr;
  std::function<void(const std::string&)> log;
};

struct ExtractSummary {
  std::size_t documents = 0;
  std::size_t candidates = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t skipped = 0;
  std::size_t input_errors = 0;
  std::size_t segment_mismatches = 0;
  std::size_t resumed_documents = 0;
  double threshold = 0.5;
  std::string config_hash;
};

inline Json to_json(const ExtractSummary& s) {
  return Json{{"documents", s.documents},   {"candidates", s.candidates},
              {"positives", s.positives},   {"negatives", s.negatives},
              {"skipped", s.skipped},       {"input_errors", s.input_errors},
              {"segment_mismatches", s.segment_mismatches},
              {"threshold", s.threshold},   {"config_hash", s.config_hash}};
}

inline std::string progress_path(const std::string& out) { return out + ".progress"; }

/// Scores every candidate and streams positives to `out_path` in
/// (doc_id, segment_id) order. Progress is recorded after each document in
/// `<out>.progress`; with `resume`, the output is truncated to the last
/// completed document and processing continues from there. The progress file
/// is removed once the run completes.
inline ExtractSummary extract_corpus(const std::vector<Document>& docs, const LoadResult<TrajectoryTriple>& triples,
                                     const FalconModel& model, const std::string& out_path,
                                     const ExtractOptions& options = {}) {
  IngestReport report;
  const auto candidates = ingest(docs, triples, report);
  ExtractSummary summary;
  summary.threshold = options.threshold;
  summary.config_hash = config_hash(model.config());
  summary.input_errors = report.triple_errors.size();
  summary.segment_mismatches = report.segment_mismatches.size();
  if (options.log) {
    for (const auto& e : report.triple_errors) options.log("triples line " + std::to_string(e.line) + ": " + e.message);
  }

  std::map<std::string, std::vector<const CandidateQuadruple*>> by_doc;
  for (const auto& d : docs) by_doc[d.doc_id];
  for (const auto& q : candidates) by_doc[q.segment.doc_id].push_back(&q);

  std::string done_through;
  std::uintmax_t offset = 0;
  const std::string progress = progress_path(out_path);
  if (options.resume && std::filesystem::exists(progress)) {
    std::ifstream pin(progress);
    const Json p = Json::parse(pin);
    if (p.value("config_hash", std::string()) != summary.config_hash) {
      throw Error("progress file was written by a different model configuration");
    }
    done_through = p.at("last_doc_id").get<std::string>();
    offset = p.at("byte_offset").get<std::uintmax_t>();
    summary.candidates = p.at("candidates").get<std::size_t>();
    summary.positives = p.at("positives").get<std::size_t>();
    summary.negatives = p.at("negatives").get<std::size_t>();
    summary.skipped = p.at("skipped").get<std::size_t>();
    summary.documents = summary.resumed_documents = p.at("documents").get<std::size_t>();
    if (!std::filesystem::exists(out_path) || std::filesystem::file_size(out_path) < offset) {
      throw Error("output file is shorter than the recorded progress");
    }
    std::filesystem::resize_file(out_path, offset);
  }

  std::ofstream out(out_path, offset > 0 ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + out_path);
  for (const auto& [doc_id, qs] : by_doc) {
    if (!done_through.empty() && doc_id <= done_through) continue;
    std::vector<CandidateQuadruple> batch;
    for (const auto* q : qs) batch.push_back(*q);
    const auto preds = predict(model, batch, options.threshold);
    std::map<std::string, std::size_t> per_segment;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t index = per_segment[batch[i].segment.segment_id]++;
      ++summary.candidates;
      if (preds[i].skipped) {
        ++summary.skipped;
        if (options.log) options.log(batch[i].segment.segment_id + " skipped: " + preds[i].reason);
      } else if (preds[i].label == 1) {
        ++summary.positives;
        out << to_json(make_record(batch[i], preds[i].score, index, options.gazetteer)).dump() << '\n';
      } else {
        ++summary.negatives;
      }
    }
    ++summary.documents;
    out.flush();
    Json p{{"last_doc_id", doc_id},
           {"byte_offset", static_cast<std::uintmax_t>(out.tellp())},
           {"documents", summary.documents},
           {"candidates", summary.candidates},
           {"positives", summary.positives},
           {"negatives", summary.negatives},
           {"skipped", summary.skipped},
           {"config_hash", summary.config_hash}};
    std::ofstream(progress, std::ios::trunc) << p.dump() << '\n';
  }
  out.close();
  std::filesystem::remove(progress);
  return summary;
}

// ---------------------------------------------------------------------------
// Interaction typing

class TransportError : public Error {
 public:
  using Error::Error;
};

/// A chat-completion backend. Implementations throw TransportError on
/// connection-level failures so the caller can retry.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt, const InteractionRecord& record) = 0;
};

inline std::string type_prompt(const InteractionRecord& r) {
  std::string year = r.year ? std::to_string(*r.year) : r.time_surface;
  return "You are given a text segment describing an interaction between two political figures.\n"
         "Classify the interaction between " + r.person1.surface + " and " + r.person2.surface + " (time: " + year +
         ", location: " + r.location + ") into exactly one of three categories:\n"
         "Adversarial: conflicting political interests.\n"
         "Cooperative: shared goals or collaboration.\n"
         "Neutral: neither clearly adversarial nor cooperative.\n"
         "Text: " + r.text + "\n"
         "Answer with one word: Adversarial, Cooperative, or Neutral.";
}

/// First type word in the reply (case-insensitive), if any.
inline std::optional<InteractionType> parse_type_response(std::string_view reply) {
  std::string lower(reply);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::optional<InteractionType> best;
  std::size_t best_pos = std::string::npos;
  for (auto t : {InteractionType::Adversarial, InteractionType::Cooperative, InteractionType::Neutral}) {
    std::string word(type_name(t));
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto pos = lower.find(word);
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = t;
    }
  }
  return best;
}

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Sets record.type (and type_flag when the reply is unusable). Returns false
/// when every attempt failed at the transport level.
inline bool classify_type(InteractionRecord& record, LlmClient& client, const RetryPolicy& retry = {}) {
  const std::string prompt = type_prompt(record);
  auto backoff = retry.initial_backoff;
  for (int attempt = 1; attempt <= retry.attempts; ++attempt) {
    try {
      const std::string reply = client.complete(prompt, record);
      if (auto t = parse_type_response(reply)) {
        record.type = *t;
        record.type_flag.reset();
      } else {
        record.type = InteractionType::Neutral;
        record.type_flag = "unparseable";
      }
      return true;
    } catch (const TransportError&) {
      if (attempt < retry.attempts && retry.sleep) retry.sleep(backoff);
      backoff *= 2;
    }
  }
  record.type.reset();
  record.type_flag = "unclassified";
  return false;
}

/// Replays canned replies. Lines: {"record_id" | ("person1","person2"), "response",
/// "failures"?}; "failures" makes the first n calls for that entry throw.
class FixtureLlmClient : public LlmClient {
 public:
  static FixtureLlmClient load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open LLM fixture " + path);
    FixtureLlmClient c;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const Json j = Json::parse(line);
      Entry e{j.at("response").get<std::string>(), j.value("failures", 0)};
      if (j.contains("record_id")) {
        c.by_id_[j["record_id"].get<std::string>()] = e;
      } else {
        c.by_pair_[pair_key(j.at("person1").get<std::string>(), j.at("person2").get<std::string>())] = e;
      }
    }
    return c;
  }

  void add(const std::string& record_id, std::string response, int failures = 0) {
    by_id_[record_id] = {std::move(response), failures};
  }

  std::string complete(const std::string&, const InteractionRecord& r) override {
    Entry* e = nullptr;
    if (auto it = by_id_.find(r.record_id); it != by_id_.end()) e = &it->second;
    else if (auto jt = by_pair_.find(pair_key(r.person1.surface, r.person2.surface)); jt != by_pair_.end()) e = &jt->second;
    if (!e) return "";
    ++calls_;
    if (e->failures > 0) {
      --e->failures;
      throw TransportError("simulated transport failure");
    }
    return e->response;
  }

  std::size_t calls() const { return calls_; }

 private:
  struct Entry {
    std::string response;
    int failures = 0;
  };

  static std::string pair_key(const std::string& a, const std::string& b) {
    std::string x = normalize_surface(a), y = normalize_surface(b);
    if (y < x) std::swap(x, y);
    return x + '\x1f' + y;
  }

  std::map<std::string, Entry> by_id_;
  std::map<std::string, Entry> by_pair_;
  std::size_t calls_ = 0;
};

struct TypingSummary {
  std::size_t records = 0;
  std::size_t unparseable = 0;
  std::size_t unclassified = 0;
  std::map<std::string, std::size_t> counts;
};

inline TypingSummary classify_records(std::vector<InteractionRecord>& records, LlmClient& client,
                                      const RetryPolicy& retry = {}) {
  TypingSummary s;
  for (auto& r : records) {
    ++s.records;
    if (!classify_type(r, client, retry)) {
      ++s.unclassified;
      continue;
    }
    if (r.type_flag) ++s.unparseable;
    ++s.counts[std::string(type_name(*r.type))];
  }
  return s;
}

}  // namespace falcon
