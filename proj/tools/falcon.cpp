// falcon: command-line front end for ingest, training, evaluation, extraction
// and network analysis.

#include <iostream>

#include <CLI11.hpp>

#include "falcon/falcon.hpp"
#include "falcon/llm_http.hpp"

namespace {

using namespace falcon;

void log_line(const std::string& s) { std::cerr << s << '\n'; }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

template <class T>
std::vector<T> checked(const LoadResult<T>& r, const std::string& path) {
  for (const auto& e : r.errors) log_line(path + ":" + std::to_string(e.line) + ": " + e.message);
  return r.items;
}

TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  TrainConfig c;
  if (!path.empty()) c = load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    apply_setting(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  c.validate();
  return c;
}

std::optional<TrajectoryExtractor> extractor_for(const TrainConfig& c, const std::string& cli_path) {
  if (!c.feature_transfer()) return std::nullopt;
  const std::string path = cli_path.empty() ? c.extractor_checkpoint : cli_path;
  if (path.empty()) throw Error("feature transfer is enabled but no extractor checkpoint was given");
  return load_extractor(path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(std::stoull(trim(item)));
  }
  return out;
}

std::unique_ptr<LlmClient> make_llm(const std::string& spec, const HttpChatConfig& http) {
  if (spec.rfind("fixture:", 0) == 0) return std::make_unique<FixtureLlmClient>(FixtureLlmClient::load(spec.substr(8)));
  if (spec == "http") return std::make_unique<HttpChatClient>(http);
  throw Error("--llm must be fixture:<path> or http");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"falcon: spatio-temporal interaction extraction and polarization analysis"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Pair trajectory triples into candidate quadruples");
  std::string docs_dir, triples_path, out_path, report_path;
  ingest_cmd->add_option("--docs", docs_dir, "Directory of .txt / .jsonl documents")->required();
  ingest_cmd->add_option("--triples", triples_path, "Triple JSONL")->required();
  ingest_cmd->add_option("--out", out_path, "Candidate JSONL output")->required();
  ingest_cmd->add_option("--report", report_path, "Optional JSON report path");

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Labeled dataset utilities");
  dataset_cmd->require_subcommand(1);
  auto* summarize_cmd = dataset_cmd->add_subcommand("summarize", "Label and split counts");
  auto* split_cmd = dataset_cmd->add_subcommand("split", "Assign train/val/test splits");
  std::string data_in, data_out;
  std::uint64_t split_seed = 0;
  std::vector<double> ratios{0.7, 0.1, 0.2};
  bool group_docs = false;
  summarize_cmd->add_option("--in", data_in, "Labeled JSONL")->required();
  split_cmd->add_option("--in", data_in, "Labeled JSONL")->required();
  split_cmd->add_option("--out", data_out, "Output labeled JSONL (stdout when omitted)");
  split_cmd->add_option("--seed", split_seed, "Shuffle seed");
  split_cmd->add_option("--ratios", ratios, "train val test ratios")->expected(3)->delimiter(',');
  split_cmd->add_flag("--group-by-document", group_docs, "Keep each document inside one split");

  // shared training options
  std::string config_path, extractor_path, checkpoint_path, corpus_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  };

  auto* pretrain_cmd = app.add_subcommand("pretrain-tra", "Pretrain and freeze the trajectory extractor");
  add_config(pretrain_cmd);
  pretrain_cmd->add_option("--corpus", corpus_path, "Labeled trajectory triple JSONL (y_tra)")->required();
  pretrain_cmd->add_option("--out", out_path, "Extractor checkpoint")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the interaction classifier");
  add_config(train_cmd);
  train_cmd->add_option("--data", data_in, "Labeled JSONL with splits")->required();
  train_cmd->add_option("--extractor", extractor_path, "Frozen extractor checkpoint");
  train_cmd->add_option("--out", out_path, "Model checkpoint")->required();
  std::string log_path;
  train_cmd->add_option("--log", log_path, "Per-epoch JSONL log");

  auto* predict_cmd = app.add_subcommand("predict", "Score candidate quadruples");
  std::string candidates_path;
  std::optional<double> threshold;
  predict_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  predict_cmd->add_option("--candidates", candidates_path, "Candidate JSONL")->required();
  predict_cmd->add_option("--out", out_path, "Prediction JSONL (stdout when omitted)");
  predict_cmd->add_option("--threshold", threshold, "Decision threshold");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on labeled data");
  std::string split_name_opt = "test";
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  eval_cmd->add_option("--data", data_in, "Labeled JSONL")->required();
  eval_cmd->add_option("--split", split_name_opt, "train|val|test|all")->check(CLI::IsMember({"train", "val", "test", "all"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the six ablation configurations");
  add_config(ablate_cmd);
  std::string seeds_opt = "1,2,3", csv_path, table_path;
  ablate_cmd->add_option("--data", data_in, "Labeled JSONL with splits")->required();
  ablate_cmd->add_option("--extractor", extractor_path, "Frozen extractor checkpoint");
  ablate_cmd->add_option("--seeds", seeds_opt, "Comma-separated seeds");
  ablate_cmd->add_option("--csv", csv_path, "Per-run CSV output");
  ablate_cmd->add_option("--table", table_path, "Aligned text table output (stdout when omitted)");

  auto* extract_cmd = app.add_subcommand("extract", "Score a corpus and stream interaction records");
  std::string gazetteer_path, summary_path;
  bool resume = false;
  extract_cmd->add_option("--docs", docs_dir, "Directory of documents")->required();
  extract_cmd->add_option("--triples", triples_path, "Triple JSONL")->required();
  extract_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  extract_cmd->add_option("--out", out_path, "Interaction JSONL")->required();
  extract_cmd->add_option("--threshold", threshold, "Decision threshold");
  extract_cmd->add_option("--gazetteer", gazetteer_path, "Location gazetteer JSONL");
  extract_cmd->add_option("--summary", summary_path, "Run summary JSON (stdout when omitted)");
  extract_cmd->add_flag("--resume", resume, "Continue from <out>.progress");
  std::string expect_backbone;
  extract_cmd->add_option("--backbone", expect_backbone, "Fail unless the checkpoint uses this backbone name");

  auto* classify_cmd = app.add_subcommand("classify-type", "Type interaction records with a chat model");
  std::string records_path, llm_spec = "http";
  HttpChatConfig http;
  classify_cmd->add_option("--records", records_path, "Interaction JSONL")->required();
  classify_cmd->add_option("--out", out_path, "Typed interaction JSONL")->required();
  classify_cmd->add_option("--llm", llm_spec, "fixture:<path> or http");
  classify_cmd->add_option("--base-url", http.base_url, "Chat endpoint base URL");
  classify_cmd->add_option("--model", http.model, "Chat model name");
  classify_cmd->add_option("--api-key-env", http.api_key_env, "Environment variable holding the API key");

  auto* analyze_cmd = app.add_subcommand("analyze", "Signed-network analyses");
  analyze_cmd->require_subcommand(1);
  std::string attrs_path;
  auto add_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--records", records_path, "Typed interaction JSONL")->required();
    cmd->add_option("--attrs", attrs_path, "Person attribute JSONL")->required();
    cmd->add_option("--out", out_path, "CSV output (stdout when omitted)");
  };
  auto* polar_cmd = analyze_cmd->add_subcommand("polarization", "Standardized modularity by party");
  add_inputs(polar_cmd);
  std::optional<int> year_from, year_to;
  bool cumulative = false, by_state = false, drop_zero = false;
  std::size_t samples = 1000, threads = 1;
  std::uint64_t master_seed = 0;
  std::string mode_opt = "verbatim", json_path;
  polar_cmd->add_option("--from", year_from, "First year");
  polar_cmd->add_option("--to", year_to, "Last year");
  polar_cmd->add_flag("--cumulative", cumulative, "Cumulative instead of per-year networks");
  polar_cmd->add_flag("--by-state", by_state, "Within-state networks over the window");
  polar_cmd->add_flag("--drop-zero-edges", drop_zero, "Remove edges whose weights sum to zero");
  polar_cmd->add_option("--samples", samples, "Null samples N");
  polar_cmd->add_option("--seed", master_seed, "Master seed");
  polar_cmd->add_option("--threads", threads, "Worker threads for null samples");
  polar_cmd->add_option("--signed-mode", mode_opt, "verbatim|gomez")->check(CLI::IsMember({"verbatim", "gomez"}));
  polar_cmd->add_option("--json", json_path, "Whole-window report JSON");

  auto* trends_cmd = analyze_cmd->add_subcommand("trends", "Inter-party share and type ratios per bin");
  add_inputs(trends_cmd);
  std::string bin_opt = "decade";
  trends_cmd->add_option("--bin", bin_opt, "decade|year")->check(CLI::IsMember({"decade", "year"}));
  trends_cmd->add_option("--from", year_from, "First year");
  trends_cmd->add_option("--to", year_to, "Last year");

  auto* distance_cmd = analyze_cmd->add_subcommand("distance", "Mean interaction distance per bin");
  add_inputs(distance_cmd);
  distance_cmd->add_option("--bin", bin_opt, "decade|year")->check(CLI::IsMember({"decade", "year"}));

  auto* stats_cmd = analyze_cmd->add_subcommand("stats", "Degree, clustering, power-law and PageRank");
  add_inputs(stats_cmd);
  std::string edges_out, gexf_out;
  int k_min = 2;
  stats_cmd->add_option("--k-min", k_min, "Power-law lower cutoff");
  stats_cmd->add_option("--edges", edges_out, "Weighted edge-list CSV export");
  stats_cmd->add_option("--gexf", gexf_out, "GEXF export");
  stats_cmd->add_option("--from", year_from, "First year");
  stats_cmd->add_option("--to", year_to, "Last year");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest_cmd->parsed()) {
      const auto docs = load_documents(docs_dir);
      IngestReport report;
      const auto candidates = ingest(docs, load_triples(triples_path), report);
      for (const auto& e : report.triple_errors) log_line(triples_path + ":" + std::to_string(e.line) + ": " + e.message);
      for (const auto& m : report.segment_mismatches) log_line(m);
      write_jsonl(out_path, candidates);
      const Json r{{"documents", report.documents},
                   {"triples", report.triples},
                   {"triple_errors", report.triple_errors.size()},
                   {"segment_mismatches", report.segment_mismatches.size()},
                   {"candidates", report.candidates}};
      if (!report_path.empty()) write_text(report_path, r.dump(2) + "\n");
      else log_line(r.dump());
    } else if (summarize_cmd->parsed()) {
      const auto data = checked(load_labeled(data_in), data_in);
      std::cout << to_json(summarize(data)).dump(2) << '\n';
    } else if (split_cmd->parsed()) {
      auto data = checked(load_labeled(data_in), data_in);
      SplitOptions opt;
      std::copy(ratios.begin(), ratios.end(), opt.ratios.begin());
      opt.seed = split_seed;
      opt.group_by_document = group_docs;
      const auto splits = split_dataset(data, opt);
      for (std::size_t i = 0; i < data.size(); ++i) data[i].split = splits[i];
      if (data_out.empty()) write_jsonl(std::cout, data);
      else write_jsonl(data_out, data);
      log_line(to_json(summarize(data)).dump());
    } else if (pretrain_cmd->parsed()) {
      const TrainConfig c = resolve_config(config_path, overrides);
      const auto corpus = checked(load_triples(corpus_path), corpus_path);
      std::vector<PretrainEpoch> log;
      auto ex = pretrain_trajectory_extractor(corpus, c, &log);
      for (const auto& e : log) {
        log_line("epoch " + std::to_string(e.epoch) + " loss=" + std::to_string(e.loss) +
                 " acc=" + std::to_string(e.accuracy));
      }
      save_extractor(out_path, ex, c);
    } else if (train_cmd->parsed()) {
      const TrainConfig c = resolve_config(config_path, overrides);
      const auto data = checked(load_labeled(data_in), data_in);
      auto result = train(data, c, extractor_for(c, extractor_path));
      std::ostringstream log;
      for (const auto& e : result.log) {
        log << to_json(e).dump() << '\n';
        log_line(to_json(e).dump());
      }
      if (!log_path.empty()) write_text(log_path, log.str());
      save_model(out_path, result.model, result.log, result.best_epoch);
      log_line("best epoch " + std::to_string(result.best_epoch) + ", config " + config_hash(c));
    } else if (predict_cmd->parsed()) {
      const FalconModel model = load_model(checkpoint_path);
      const auto cands = checked(load_candidates(candidates_path), candidates_path);
      const auto preds = predict(model, cands, threshold.value_or(model.config().threshold));
      std::ostringstream out;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        Json j = to_json(cands[i]);
        j["score"] = preds[i].score;
        j["label"] = preds[i].label;
        j["skipped"] = preds[i].skipped;
        if (preds[i].skipped) j["reason"] = preds[i].reason;
        out << j.dump() << '\n';
      }
      write_text(out_path, out.str());
    } else if (eval_cmd->parsed()) {
      const FalconModel model = load_model(checkpoint_path);
      auto data = checked(load_labeled(data_in), data_in);
      if (split_name_opt != "all") data = select_split(data, parse_split(split_name_opt));
      std::cout << to_json(evaluate(model, data, data_in + ":" + split_name_opt)).dump(2) << '\n';
    } else if (ablate_cmd->parsed()) {
      const TrainConfig c = resolve_config(config_path, overrides);
      const auto data = checked(load_labeled(data_in), data_in);
      std::optional<TrajectoryExtractor> ex;
      const std::string path = extractor_path.empty() ? c.extractor_checkpoint : extractor_path;
      if (path.empty()) throw Error("ablation needs an extractor checkpoint for the feature-transfer rows");
      ex = load_extractor(path);
      const auto rows = run_ablations(data, c, ex, parse_seeds(seeds_opt), log_line);
      if (!csv_path.empty()) write_text(csv_path, ablation_csv(rows));
      write_text(table_path, ablation_text(rows));
    } else if (extract_cmd->parsed()) {
      const FalconModel model = load_model(checkpoint_path);
      if (!expect_backbone.empty() && model.config().backbone.name != expect_backbone) {
        throw Error("checkpoint backbone '" + model.config().backbone.name + "' does not match '" + expect_backbone + "'");
      }
      std::optional<Gazetteer> gaz;
      if (!gazetteer_path.empty()) gaz = Gazetteer::load(gazetteer_path);
      ExtractOptions opt;
      opt.threshold = threshold.value_or(model.config().threshold);
      opt.resume = resume;
      opt.gazetteer = gaz ? &*gaz : nullptr;
      opt.log = log_line;
      const auto summary = extract_corpus(load_documents(docs_dir), load_triples(triples_path), model, out_path, opt);
      write_text(summary_path, to_json(summary).dump(2) + "\n");
    } else if (classify_cmd->parsed()) {
      auto records = checked(load_records(records_path), records_path);
      auto client = make_llm(llm_spec, http);
      const auto s = classify_records(records, *client);
      write_jsonl(out_path, records);
      log_line(Json{{"records", s.records}, {"unparseable", s.unparseable}, {"unclassified", s.unclassified},
                    {"counts", s.counts}}.dump());
    } else if (polar_cmd->parsed()) {
      const auto records = checked(load_records(records_path), records_path);
      const auto attrs = AttributeTable::load(attrs_path);
      PolarizationOptions o;
      o.samples = samples;
      o.master_seed = master_seed;
      o.mode = mode_opt == "gomez" ? SignedMode::Gomez : SignedMode::Verbatim;
      o.drop_zero_edges = drop_zero;
      o.threads = threads;
      const YearWindow window{year_from, year_to};
      if (!json_path.empty()) {
        GraphOptions go{window, drop_zero, std::nullopt};
        BuildReport br;
        const auto g = build_graph(records, attrs, go, &br);
        const auto p = polarization_point("all", g, o);
        Json j{{"graph", to_json(br)}, {"nodes", p.nodes}, {"edges", p.edges}};
        j["report"] = p.report ? to_json(*p.report) : Json(nullptr);
        if (!p.note.empty()) j["note"] = p.note;
        write_text(json_path, j.dump(2) + "\n");
      }
      std::vector<PolarizationPoint> points;
      if (by_state) {
        points = state_polarization(records, attrs, window, o);
      } else {
        int lo = year_from.value_or(std::numeric_limits<int>::max()), hi = year_to.value_or(std::numeric_limits<int>::min());
        if (!year_from || !year_to) {
          for (const auto& r : records) {
            if (!r.year) continue;
            if (!year_from) lo = std::min(lo, *r.year);
            if (!year_to) hi = std::max(hi, *r.year);
          }
        }
        if (lo <= hi) points = annual_polarization(records, attrs, lo, hi, cumulative, o);
      }
      write_text(out_path, polarization_csv(points));
    } else if (trends_cmd->parsed()) {
      const auto records = checked(load_records(records_path), records_path);
      const auto attrs = AttributeTable::load(attrs_path);
      const auto s = trend_ratios(records, attrs, bin_opt == "year" ? TrendBin::Year : TrendBin::Decade,
                                  YearWindow{year_from, year_to});
      write_text(out_path, trend_csv(s));
    } else if (distance_cmd->parsed()) {
      const auto records = checked(load_records(records_path), records_path);
      const auto attrs = AttributeTable::load(attrs_path);
      std::size_t missing = 0;
      const auto rows = distance_series(records, attrs, bin_opt == "year" ? TrendBin::Year : TrendBin::Decade, &missing);
      std::ostringstream out;
      out << "bin,count,mean_km\n";
      for (const auto& r : rows) out << r.bin << ',' << r.count << ',' << opt_csv(r.mean_km) << '\n';
      write_text(out_path, out.str());
      log_line(std::to_string(missing) + " records without complete geocodes");
    } else if (stats_cmd->parsed()) {
      const auto records = checked(load_records(records_path), records_path);
      const auto attrs = AttributeTable::load(attrs_path);
      GraphOptions go;
      go.window = {year_from, year_to};
      const auto g = build_graph(records, attrs, go);
      const auto s = graph_stats(g, k_min);
      Json j;
      j["nodes"] = g.node_count();
      j["edges"] = g.edge_count();
      Json hist = Json::object();
      for (const auto& [k, n] : s.degree_histogram) hist[std::to_string(k)] = n;
      j["degree_histogram"] = hist;
      j["clustering"] = s.clustering ? Json(*s.clustering) : Json(nullptr);
      j["alpha"] = s.power_law.alpha ? Json(*s.power_law.alpha) : Json(nullptr);
      j["alpha_n"] = s.power_law.n;
      j["k_min"] = s.power_law.k_min;
      Json pr = Json::object();
      for (std::size_t i = 0; i < g.node_count(); ++i) pr[g.id(i)] = s.pagerank[i];
      j["pagerank"] = pr;
      write_text(out_path, j.dump(2) + "\n");
      if (!edges_out.empty()) write_text(edges_out, edge_csv(g));
      if (!gexf_out.empty()) write_text(gexf_out, to_gexf(g));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
