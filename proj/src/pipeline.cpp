#include "efr/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"
#include "efr/evaluation.hpp"
#include "efr/rng.hpp"

namespace efr {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      // inputs
      {"corpus", ""},
      {"train_queries", ""},
      {"queries", ""},
      {"query_embeddings", ""},
      {"entity_embeddings", ""},
      {"oracle_scores", ""},
      {"runs", ""},
      // artifacts (empty = default name under output_dir)
      {"output_dir", "efr-out"},
      {"sparse_index", ""},
      {"dense_index", ""},
      {"entity_scores", ""},
      {"training_set", ""},
      {"checkpoint", ""},
      {"loss_csv", ""},
      {"run", ""},
      {"sidecar", ""},
      {"report", ""},
      // text + bm25
      {"stem", "false"},
      {"stopwords", "false"},
      {"k1", "1.1"},
      {"b", "0.4"},
      // mining
      {"theta", "0.8"},
      {"srr_depth", "5"},
      {"init_depth", "100"},
      {"n_pos", "5"},
      {"n_neg", "25"},
      {"sources", "all"},
      // encoder + training
      {"hash_dim", "16384"},
      {"dim", "64"},
      {"init_scale", "1.0"},
      {"learning_rate", "1e-5"},
      {"epochs", "8"},
      {"batch_size", "6"},
      {"warmup_fraction", "0.1"},
      {"w_qp", "1"},
      {"w_qpe", "1"},
      {"w_ent", "1"},
      {"optimizer", "momentless"},
      {"weight_decay", "0.01"},
      {"eval_every", "0"},
      // inference + evaluation
      {"lambda", "1"},
      {"lambdas", "0,0.25,0.5,1,2,4"},
      {"rerank_depth", "80"},
      {"metric_k", "5"},
      {"subset", "all"},
      {"bootstrap", "0"},
      {"tag", "efr"},
      // synthetic data
      {"synth_passages", "2400"},
      {"synth_train_queries", "400"},
      {"synth_test_queries", "200"},
      // misc
      {"seed", "42"},
      {"threads", "0"},
  };
  return d;
}

const std::map<std::string, std::string>& default_files() {
  static const std::map<std::string, std::string> d{
      {"sparse_index", "sparse.efsi"},         {"dense_index", "passages.efem"},
      {"entity_scores", "entity_scores.jsonl"}, {"training_set", "training_set.jsonl"},
      {"checkpoint", "model.efck"},            {"loss_csv", "loss.csv"},
      {"run", "run.trec"},                      {"sidecar", "run.breakdown.jsonl"},
      {"report", "report.json"},
  };
  return d;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// manifest.json in output_dir records provenance for every artifact the
// fixed binary layouts cannot carry themselves.
fs::path manifest_path(const RunConfig& c) { return fs::path(c.get("output_dir")) / "manifest.json"; }

json read_manifest(const RunConfig& c) {
  const auto p = manifest_path(c);
  if (!fs::exists(p)) return json::object();
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw FormatError("unreadable manifest " + p.string() + ": " + e.what());
  }
}

void record_artifact(const RunConfig& c, const fs::path& artifact, const std::string& command,
                     const std::string& format, std::uint32_t version, json extra = json::object()) {
  json m = read_manifest(c);
  json entry = std::move(extra);
  entry["command"] = command;
  entry["format"] = format;
  entry["format_version"] = version;
  entry["config_hash"] = c.hash();
  entry["seed"] = c.seed();
  m["artifacts"][artifact.lexically_normal().generic_string()] = entry;
  write_file(manifest_path(c), m.dump(2) + "\n");
}

std::string file_digest(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

std::string run_tag(const RunConfig& c, double lambda) {
  return c.get("tag") + "-" + c.hash().substr(0, 8) + "-s" + std::to_string(c.seed()) + "-l" +
         format_real(lambda);
}

std::string config_echo(const RunConfig& c) { return c.canonical() + "config_hash=" + c.hash() + "\n"; }

struct Loaded {
  EncoderModel model{EncoderConfig{}};
  DenseIndex dense;
  std::vector<QueryExample> queries;
  std::optional<EmbeddingMap> query_embeddings;
  std::optional<EmbeddingMap> entity_embeddings;
};

Loaded load_for_retrieval(const RunConfig& c) {
  const auto ckpt_path = c.input("checkpoint");
  const auto dense_path = c.input("dense_index");
  Loaded l;
  l.queries = load_queries(c.input("queries"));
  l.model = load_checkpoint(ckpt_path).model;

  const json m = read_manifest(c);
  const auto key = dense_path.lexically_normal().generic_string();
  if (m.contains("artifacts") && m["artifacts"].contains(key)) {
    const auto& entry = m["artifacts"][key];
    if (entry.contains("model_digest") && entry["model_digest"] != file_digest(ckpt_path)) {
      throw ConfigError("dense index " + dense_path.string() +
                        " was built from a different model; rerun index with this checkpoint");
    }
  }
  l.dense = DenseIndex::from_map(read_embeddings(dense_path));
  if (l.dense.dim() != l.model.dim()) {
    throw ConfigError("dense index dimension " + std::to_string(l.dense.dim()) +
                      " does not match model dimension " + std::to_string(l.model.dim()));
  }
  if (!c.get("query_embeddings").empty()) l.query_embeddings = read_embeddings(c.input("query_embeddings"));
  if (!c.get("entity_embeddings").empty()) {
    l.entity_embeddings = read_embeddings(c.input("entity_embeddings"));
  }
  return l;
}

RetrievalOptions retrieval_options(const RunConfig& c, double lambda) {
  RetrievalOptions o;
  o.depth = c.count("rerank_depth");
  o.lambda = lambda;
  if (o.depth == 0) throw ConfigError("rerank_depth must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  return o;
}

std::vector<QueryExample> ablated(const RunConfig& c, std::span<const QueryExample> queries) {
  try {
    return ablate_entity_sources(queries, parse_source_set(c.get("sources")));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

// Query tower sees the whole query; only the entity set is ablated.
std::vector<RankedQuery> retrieve_with_sources(const RunConfig& c, const Loaded& l, double lambda) {
  const auto kept = ablated(c, l.queries);
  std::vector<QueryExample> mixed = l.queries;
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i].entities = kept[i].entities;
  std::vector<RankedQuery> out;
  EmbeddingMap qemb;
  const EmbeddingMap* qptr = l.query_embeddings ? &*l.query_embeddings : nullptr;
  if (!qptr) {
    for (const auto& q : l.queries) qemb.emplace(q.id, encode_query(l.model, q));
    qptr = &qemb;
  }
  return retrieve(l.model, l.dense, mixed, retrieval_options(c, lambda), qptr,
                  l.entity_embeddings ? &*l.entity_embeddings : nullptr);
}

constexpr const char* kSynthTraining =
    "# desk-scale training schedule for the synthetic set\n"
    "learning_rate=0.1\n"
    "epochs=8\n"
    "batch_size=6\n"
    "warmup_fraction=0.1\n";

}  // namespace

// ---------------------------------------------------------------- RunConfig

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing path: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  RunConfig c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      c.assign(t);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto& v = get(key);
  if (v == "inf" || v == "+inf") return INFINITY;
  if (v == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

bool RunConfig::flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path RunConfig::path(const std::string& key) const {
  const auto& v = get(key);
  if (!v.empty()) return v;
  const auto it = default_files().find(key);
  if (it == default_files().end()) throw ConfigError("config key '" + key + "' is required");
  return fs::path(get("output_dir")) / it->second;
}

fs::path RunConfig::input(const std::string& key) const {
  const auto p = path(key);
  if (!fs::exists(p)) throw ConfigError("missing path: " + p.string() + " (" + key + ")");
  return p;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "threads") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a(canonical())); }

// ---------------------------------------------------------------- typed views

TextOptions text_options(const RunConfig& c) { return {c.flag("stem"), c.flag("stopwords")}; }

Bm25Params bm25_params(const RunConfig& c) { return {c.real("k1"), c.real("b")}; }

MinerConfig miner_config(const RunConfig& c) {
  MinerConfig m;
  m.srr_depth = c.count("srr_depth");
  m.init_depth = c.count("init_depth");
  m.n_pos = c.count("n_pos");
  m.n_neg = c.count("n_neg");
  m.theta = c.real("theta");
  m.seed = derive_seed(c.seed(), 1);
  if (m.srr_depth == 0 || m.n_pos == 0 || m.n_neg == 0 || m.init_depth == 0) {
    throw ConfigError("srr_depth, init_depth, n_pos and n_neg must be positive");
  }
  return m;
}

EncoderConfig encoder_config(const RunConfig& c) {
  EncoderConfig e;
  e.hash_dim = c.count("hash_dim");
  e.dim = c.count("dim");
  e.init_scale = c.real("init_scale");
  if (e.hash_dim < 2 || e.dim < 2) throw ConfigError("hash_dim and dim must be at least 2");
  return e;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.learning_rate = c.real("learning_rate");
  t.epochs = c.count("epochs");
  t.batch_size = c.count("batch_size");
  t.warmup_fraction = c.real("warmup_fraction");
  t.w_qp = c.real("w_qp");
  t.w_qpe = c.real("w_qpe");
  t.w_ent = c.real("w_ent");
  t.seed = derive_seed(c.seed(), 2);
  t.lambda = c.real("lambda");
  t.weight_decay = c.real("weight_decay");
  t.eval_every = c.count("eval_every");
  try {
    t.optimizer = parse_optimizer(c.get("optimizer"));
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

// ---------------------------------------------------------------- retrieval

std::vector<RankedQuery> retrieve(const EncoderModel& model, const DenseIndex& passages,
                                  std::span<const QueryExample> queries,
                                  const RetrievalOptions& options,
                                  const EmbeddingMap* query_embeddings,
                                  const EmbeddingMap* entity_embeddings) {
  if (passages.empty()) throw InvalidArgument("retrieve: empty dense index");
  auto lookup = [](const EmbeddingMap& m, const std::string& key, const char* what) {
    const auto it = m.find(key);
    if (it == m.end()) throw InvalidArgument(std::string("no ") + what + " embedding for '" + key + "'");
    return it->second;
  };

  std::vector<RankedQuery> out(queries.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < queries.size(); ++i) {
    try {
      const auto& q = queries[i];
      const EmbeddingVector f_q =
          query_embeddings ? lookup(*query_embeddings, q.id, "query") : encode_query(model, q);
      const auto candidates = mips_topk_serial(passages, f_q, options.depth);
      std::vector<EntityInput> entities;
      entities.reserve(q.entities.size());
      for (const auto& e : q.entities) {
        entities.push_back({e.text, entity_embeddings
                                        ? lookup(*entity_embeddings, entity_embedding_key(q.id, e), "entity")
                                        : encode_entity(model, e, q)});
      }
      out[i] = {q.id, rerank(candidates, model, passages, f_q, entities, options.lambda)};
    } catch (...) {
#pragma omp critical(efr_retrieve_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<QueryRun> to_query_runs(std::span<const RankedQuery> ranked) {
  std::vector<QueryRun> runs;
  runs.reserve(ranked.size());
  for (const auto& [qid, hits] : ranked) {
    QueryRun r{qid, {}};
    for (const auto& h : hits) r.entries.push_back({h.id, h.rank, h.breakdown.combined});
    runs.push_back(std::move(r));
  }
  return runs;
}

DenseIndex build_dense_index(const EncoderModel& model, std::span<const Passage> passages) {
  std::vector<std::string> ids;
  ids.reserve(passages.size());
  for (const auto& p : passages) ids.push_back(p.id);
  const auto rows = encode_passages(model, passages);
  return DenseIndex(std::move(ids), rows);
}

std::map<std::string, std::vector<std::string>> oracle_entities(
    std::span<const std::pair<std::string, std::vector<EntityScore>>> scores) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [qid, list] : scores) {
    auto& texts = out[qid];
    for (const auto& s : list) {
      if (s.is_oracle && std::find(texts.begin(), texts.end(), s.entity.text) == texts.end()) {
        texts.push_back(s.entity.text);
      }
    }
  }
  return out;
}

void write_synthetic(const SynthDataset& data, const fs::path& dir, const std::string& config_text) {
  save_corpus(dir / "corpus.jsonl", data.passages);
  save_queries(dir / "train_queries.jsonl", data.train_queries);
  save_queries(dir / "test_queries.jsonl", data.test_queries);
  write_file(dir / "efr.conf", config_text);
}

// ---------------------------------------------------------------- commands

void cmd_index(const RunConfig& c, std::ostream& out) {
  const auto corpus_path = c.input("corpus");
  const auto passages = load_corpus(corpus_path);
  if (passages.empty()) throw ConfigError("corpus " + corpus_path.string() + " is empty");

  const auto sparse = InvertedIndex::build(passages, bm25_params(c), text_options(c));
  const auto sparse_path = c.path("sparse_index");
  sparse.save(sparse_path);
  record_artifact(c, sparse_path, "index", "EFSI", InvertedIndex::kFormatVersion,
                  {{"corpus_digest", file_digest(corpus_path)}});

  const auto ckpt_path = c.path("checkpoint");
  json dense_meta = json::object();
  EncoderModel model{EncoderConfig{}};
  if (fs::exists(ckpt_path)) {
    model = load_checkpoint(ckpt_path).model;
    dense_meta["model_digest"] = file_digest(ckpt_path);
    out << "dense: encoding with " << ckpt_path.string() << "\n";
  } else {
    model = EncoderModel::initialize(encoder_config(c), derive_seed(c.seed(), 3));
    dense_meta["model_digest"] = "untrained";
    out << "dense: no checkpoint at " << ckpt_path.string() << ", encoding with the seeded initial model\n";
  }
  const auto dense = build_dense_index(model, passages);
  const auto dense_path = c.path("dense_index");
  write_embeddings(dense.to_map(), dense_path, static_cast<std::uint32_t>(model.dim()));
  record_artifact(c, dense_path, "index", "EFEM", kEmbeddingFormatVersion, dense_meta);

  out << "passages: " << sparse.doc_count() << "\n"
      << "terms: " << sparse.term_count() << "\n"
      << "avg_doc_length: " << format_real(sparse.avg_doc_length()) << "\n"
      << "dense_dim: " << model.dim() << "\n"
      << "sparse_index: " << sparse_path.string() << "\n"
      << "dense_index: " << dense_path.string() << "\n";
}

void cmd_mine(const RunConfig& c, std::ostream& out) {
  const auto passages = load_corpus(c.input("corpus"));
  const auto queries = ablated(c, load_queries(c.input("train_queries")));
  const auto index = InvertedIndex::load(c.input("sparse_index"));
  if (index.text_options().stem != c.flag("stem")) {
    throw ConfigError("sparse index stemming setting differs from config; rerun index");
  }
  const Corpus corpus(passages, c.flag("stem"));
  const auto mined = mine_training_set(index, corpus, queries, miner_config(c));

  const auto scores_path = c.path("entity_scores");
  const auto set_path = c.path("training_set");
  save_entity_scores(scores_path, mined.per_query);
  save_training_set(set_path, mined.instances);
  record_artifact(c, scores_path, "mine", "entity-scores-jsonl", 1);
  record_artifact(c, set_path, "mine", "training-set-jsonl", 1);

  std::size_t scored = 0, oracle = 0;
  for (const auto& q : mined.per_query) {
    scored += q.entity_scores.size();
    for (const auto& s : q.entity_scores) oracle += s.is_oracle ? 1 : 0;
  }
  out << "queries: " << queries.size() << "\n"
      << "dropped: " << mined.dropped_queries << "\n"
      << "entities_scored: " << scored << "\n"
      << "oracle_entities: " << oracle << "\n"
      << "instances: " << mined.instances.size() << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  const auto passages = load_corpus(c.input("corpus"));
  const auto queries = load_queries(c.input("train_queries"));
  const auto instances = load_training_set(c.input("training_set"));
  if (instances.empty()) throw ConfigError("training set is empty");
  const auto config = train_config(c);
  const Corpus corpus(passages, c.flag("stem"));

  auto model = EncoderModel::initialize(encoder_config(c), derive_seed(c.seed(), 3));
  const TrainingData data(corpus, queries, instances, model.hash_dim());
  EvalHook hook;
  if (config.eval_every > 0) {
    hook = [&out](std::size_t step, const EncoderModel&) { out << "step " << step << "\n"; };
  }
  const auto history = train(model, data, config, hook);

  const auto ckpt_path = c.path("checkpoint");
  const auto csv_path = c.path("loss_csv");
  save_checkpoint(ckpt_path, model, config_echo(c));
  write_loss_csv(csv_path, history);
  record_artifact(c, ckpt_path, "train", "EFCK", kCheckpointFormatVersion);
  record_artifact(c, csv_path, "train", "loss-csv", 1);

  out << "instances: " << instances.size() << "\n"
      << "steps: " << history.size() << "\n";
  if (!history.empty()) {
    out << "final_loss: " << format_real(history.back().total) << "\n";
  }
  out << "checkpoint: " << ckpt_path.string() << "\n";
}

void cmd_retrieve(const RunConfig& c, std::ostream& out) {
  const auto loaded = load_for_retrieval(c);
  const double lambda = c.real("lambda");
  const auto ranked = retrieve_with_sources(c, loaded, lambda);
  const auto runs = to_query_runs(ranked);

  const auto run_path = c.path("run");
  const auto sidecar_path = c.path("sidecar");
  write_trec_run(run_path, runs, run_tag(c, lambda));
  write_breakdown_sidecar(sidecar_path, ranked, lambda);
  record_artifact(c, run_path, "retrieve", "trec-run", 1, {{"lambda", lambda}});
  record_artifact(c, sidecar_path, "retrieve", "breakdown-jsonl", 1, {{"lambda", lambda}});
  out << "queries: " << runs.size() << "\n"
      << "depth: " << c.count("rerank_depth") << "\n"
      << "lambda: " << format_real(lambda) << "\n"
      << "run: " << run_path.string() << "\n";
}

namespace {

std::vector<QueryExample> eval_queries(const RunConfig& c) {
  auto queries = load_queries(c.input("queries"));
  const auto& subset = c.get("subset");
  if (subset == "hard") return hard_subset(queries, c.flag("stem"));
  if (subset != "all") throw ConfigError("subset must be 'all' or 'hard'");
  return queries;
}

std::map<std::string, std::vector<std::string>> eval_oracle(const RunConfig& c) {
  if (c.get("oracle_scores").empty()) return {};
  return oracle_entities(load_entity_scores(c.input("oracle_scores")));
}

void write_reports(const RunConfig& c, std::span<const MetricReport> reports, const std::string& extra,
                   std::ostream& out) {
  const auto json_path = c.path("report");
  auto txt_path = json_path;
  txt_path.replace_extension(".txt");
  const auto provenance = "config_hash=" + c.hash() + " seed=" + std::to_string(c.seed());
  write_file(json_path, report_json(reports, provenance));
  const auto table = report_table(reports) + extra;
  write_file(txt_path, table);
  record_artifact(c, json_path, "eval", "report-json", 1);
  out << table;
}

}  // namespace

void cmd_eval(const RunConfig& c, std::ostream& out) {
  const Corpus corpus(load_corpus(c.input("corpus")), c.flag("stem"));
  const auto queries = eval_queries(c);
  const auto oracle = eval_oracle(c);
  const std::size_t k = c.count("metric_k");
  if (k == 0) throw ConfigError("metric_k must be positive");

  std::vector<fs::path> run_paths;
  for (const auto& r : c.list("runs")) run_paths.emplace_back(r);
  if (run_paths.empty()) run_paths.push_back(c.path("run"));

  std::vector<MetricReport> reports;
  for (const auto& p : run_paths) {
    if (!fs::exists(p)) throw ConfigError("missing path: " + p.string() + " (runs)");
    auto run = read_trec_run(p);
    if (c.get("subset") == "hard") {
      std::set<std::string> keep;
      for (const auto& q : queries) keep.insert(q.id);
      std::erase_if(run, [&](const QueryRun& r) { return !keep.contains(r.query_id); });
    }
    try {
      reports.push_back(evaluate_run(p.filename().string(), run, queries, corpus, k, oracle));
    } catch (const InvalidArgument& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
  }

  std::string extra;
  const std::size_t resamples = c.count("bootstrap");
  if (resamples > 0) {
    auto per_query = [](const MetricReport& r) {
      std::vector<double> v;
      for (const auto& row : r.rows) v.push_back(row.reciprocal_rank);
      return v;
    };
    const auto base = per_query(reports.front());
    for (std::size_t i = 1; i < reports.size(); ++i) {
      const auto b = paired_bootstrap(per_query(reports[i]), base, resamples, c.seed());
      char line[256];
      std::snprintf(line, sizeof line, "bootstrap %s vs %s: mean_diff=%.4f p=%.4f\n",
                    reports[i].name.c_str(), reports.front().name.c_str(), b.mean_difference,
                    b.p_value);
      extra += line;
    }
  }
  write_reports(c, reports, extra, out);
}

void cmd_sweep_lambda(const RunConfig& c, std::ostream& out) {
  const auto loaded = load_for_retrieval(c);
  const Corpus corpus(load_corpus(c.input("corpus")), c.flag("stem"));
  const std::size_t k = c.count("metric_k");
  if (k == 0) throw ConfigError("metric_k must be positive");

  std::vector<double> lambdas;
  for (const auto& s : c.list("lambdas")) {
    RunConfig tmp;
    tmp.set("lambda", s);
    lambdas.push_back(tmp.real("lambda"));
  }
  if (lambdas.empty()) throw ConfigError("lambdas is empty");

  std::vector<MetricReport> reports;
  json sweep = json::array();
  for (const double lambda : lambdas) {
    const auto runs = to_query_runs(retrieve_with_sources(c, loaded, lambda));
    const auto run_path = fs::path(c.get("output_dir")) / ("run.lambda-" + format_real(lambda) + ".trec");
    write_trec_run(run_path, runs, run_tag(c, lambda));
    record_artifact(c, run_path, "sweep-lambda", "trec-run", 1, {{"lambda", lambda}});
    reports.push_back(evaluate_run("lambda=" + format_real(lambda), runs, loaded.queries, corpus, k));
    sweep.push_back({{"lambda", lambda},
                     {"mrr_at_k", reports.back().mrr_at_k},
                     {"p_at_k", reports.back().p_at_k},
                     {"run", run_path.generic_string()}});
  }
  const auto sweep_path = fs::path(c.get("output_dir")) / "sweep.json";
  json doc{{"k", k}, {"config_hash", c.hash()}, {"seed", c.seed()}, {"points", sweep}};
  write_file(sweep_path, doc.dump(2) + "\n");
  record_artifact(c, sweep_path, "sweep-lambda", "sweep-json", 1);
  out << report_table(reports);
}

void cmd_gen_synth(const RunConfig& c, std::ostream& out) {
  SynthConfig s;
  s.seed = c.seed();
  s.total_passages = c.count("synth_passages");
  s.train_queries = c.count("synth_train_queries");
  s.test_queries = c.count("synth_test_queries");
  SynthDataset data;
  try {
    data = generate_synthetic(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = c.get("output_dir");
  const auto rel = [&](const char* name) { return (dir / name).generic_string(); };
  std::string conf = "# generated by gen-synth\n";
  conf += "corpus=" + rel("corpus.jsonl") + "\n";
  conf += "train_queries=" + rel("train_queries.jsonl") + "\n";
  conf += "queries=" + rel("test_queries.jsonl") + "\n";
  conf += "output_dir=" + dir.generic_string() + "\n";
  conf += "seed=" + std::to_string(c.seed()) + "\n";
  conf += kSynthTraining;
  write_synthetic(data, dir, conf);
  out << "passages: " << data.passages.size() << "\n"
      << "train_queries: " << data.train_queries.size() << "\n"
      << "test_queries: " << data.test_queries.size() << "\n"
      << "config: " << rel("efr.conf") << "\n";
}

}  // namespace efr
