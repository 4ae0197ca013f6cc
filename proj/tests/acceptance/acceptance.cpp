// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "efr/binary_io.hpp"
#include "efr/evaluation.hpp"
#include "efr/pipeline.hpp"
#include "efr/rng.hpp"

#ifdef EFR_HAS_OPENMP
#include <omp.h>
#endif

using namespace efr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1. summed reciprocal ranking ----------------------------------------

Outcome srr_hand_values() {
  const Corpus c({make_passage("a", "capsicum here"), make_passage("b", "nothing"),
                  make_passage("c", "capsicum again"), make_passage("d", "no"),
                  make_passage("e", "a capsicum")});
  const std::vector<std::string> ans{"capsicum"};
  auto hits = [](std::initializer_list<const char*> ids) {
    std::vector<SparseHit> out;
    std::size_t r = 1;
    for (const char* id : ids) out.push_back({id, 0.0, r++});
    return out;
  };
  const Corpus all({make_passage("1", "x"), make_passage("2", "x"), make_passage("3", "x"),
                    make_passage("4", "x"), make_passage("5", "x")});
  const double v0 = srr(hits({"b", "d"}), ans, c);
  const double v1 = srr(hits({"a", "b", "c", "d"}), ans, c);
  const double v2 = srr(hits({"1", "2", "3", "4", "5"}), std::vector<std::string>{"x"}, all);
  const bool ok = std::abs(v0) < 1e-9 && std::abs(v1 - 4.0 / 3.0) < 1e-9 && std::abs(v2 - 2.283333333333333) < 1e-9;
  return {ok, fmt("0 -> %.12g, 1+1/3 -> %.12g, H5 -> %.12g", v0, v1, v2)};
}

// ---- 2. BM25 ---------------------------------------------------------------

const std::vector<std::string> kBm25Texts{
    "the red pepper is a vegetable",
    "a pepper grinder on the table",
    "green pepper and red pepper and yellow pepper",
    "the vegetable garden behind the house",
    "a kite over the beach",
    "kites and more kites at the festival",
    "the teddy bear sits on the bed",
    "a bear in the forest eating honey",
    "honey bees make honey from flowers",
    "the market sells every vegetable you can name",
    "red apples and red cherries",
    "a long passage about the history of the spice trade including black pepper white pepper and long pepper",
    "cooking with vegetable oil",
    "the chili is a hot pepper",
    "bell shaped fruit",
    "the festival of flowers",
    "a red kite is a bird of prey",
    "vegetable vegetable vegetable",
    "nothing relevant here at all",
    "pepper"};

// Straight transcription of the scoring formula over whitespace tokens.
double bm25_reference(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                      std::size_t d, double k1, double b) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0;
  for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
  const double avgdl = total_len / n;
  std::map<std::string, int> qtf;
  for (const auto& t : query) ++qtf[t];
  double score = 0;
  for (const auto& [term, count] : qtf) {
    double df = 0;
    for (const auto& doc : docs) df += std::count(doc.begin(), doc.end(), term) > 0 ? 1 : 0;
    const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), term));
    if (tf == 0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double dl = static_cast<double>(docs[d].size());
    score += count * idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
  }
  return score;
}

Outcome bm25_oracle() {
  std::vector<Passage> passages;
  std::vector<std::vector<std::string>> docs;
  for (std::size_t i = 0; i < kBm25Texts.size(); ++i) {
    passages.push_back(make_passage(fmt("d%02zu", i), kBm25Texts[i]));
    std::istringstream ss(kBm25Texts[i]);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    docs.push_back(toks);
  }
  const Bm25Params params{1.1, 0.4};
  const auto idx = InvertedIndex::build(passages, params);
  const std::vector<std::vector<std::string>> queries{
      {"red", "pepper"}, {"vegetable", "garden"}, {"honey", "honey", "bear"}, {"kite", "festival", "flowers"}};
  double worst = 0;
  for (const auto& q : queries) {
    const auto bag = make_term_bag(q);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      worst = std::max(worst, std::abs(idx.score_document(bag, d) - bm25_reference(docs, q, d, 1.1, 0.4)));
    }
    for (const auto& h : idx.search(bag, 20)) {
      const auto d = static_cast<std::size_t>(std::stoi(h.passage_id.substr(1)));
      worst = std::max(worst, std::abs(h.score - bm25_reference(docs, q, d, 1.1, 0.4)));
    }
  }

  // duplicated texts give exact ties; order must not depend on corpus order
  std::vector<Passage> tied = passages;
  for (std::size_t i = 0; i < 6; ++i) tied.push_back(make_passage(fmt("t%02zu", i), kBm25Texts[i % 3]));
  const auto bag = make_term_bag(std::vector<std::string>{"red", "pepper"});
  const auto reference = InvertedIndex::build(tied, params).search(bag, 26);
  bool stable = true;
  Rng rng(11);
  for (int trial = 0; trial < 50 && stable; ++trial) {
    auto shuffled = tied;
    rng.shuffle(shuffled);
    const auto got = InvertedIndex::build(shuffled, params).search(bag, 26);
    stable = got.size() == reference.size();
    for (std::size_t i = 0; stable && i < got.size(); ++i) {
      stable = got[i].passage_id == reference[i].passage_id && got[i].score == reference[i].score;
    }
  }
  for (std::size_t i = 1; stable && i < reference.size(); ++i) {
    if (reference[i].score == reference[i - 1].score) stable = reference[i - 1].passage_id < reference[i].passage_id;
  }
  return {worst < 1e-6 && stable, fmt("max |diff| %.3g over 20 passages, tie order stable over 50 permutations: %s",
                                      worst, stable ? "yes" : "no")};
}

// ---- 3. entity-focused score ----------------------------------------------

Outcome qpe_properties() {
  Rng rng(3);
  std::size_t bad_bounds = 0, bad_single = 0, bad_perm = 0, bad_norm = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.index(12);
    std::vector<double> qe(m), pe(m);
    for (auto& v : qe) v = 8.0 * rng.normal();
    for (auto& v : pe) v = 4.0 * rng.normal();
    const double s = score_qpe(qe, pe);
    const auto [lo, hi] = std::minmax_element(pe.begin(), pe.end());
    if (s < *lo - 1e-9 || s > *hi + 1e-9) ++bad_bounds;

    if (std::abs(score_qpe(std::vector<double>{qe[0]}, std::vector<double>{pe[0]}) - pe[0]) > 1e-12) ++bad_single;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<double> qe2, pe2;
    for (auto i : order) qe2.push_back(qe[i]), pe2.push_back(pe[i]);
    if (std::abs(score_qpe(qe2, pe2) - s) > 1e-9) ++bad_perm;

    const auto w = entity_weights(qe);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9 || std::any_of(w.begin(), w.end(), [](double x) { return x < 0; })) ++bad_norm;
  }
  const bool ok = !bad_bounds && !bad_single && !bad_perm && !bad_norm;
  return {ok, fmt("violations over 1000 trials each: bounds %zu, single-entity %zu, permutation %zu, weight sum %zu",
                  bad_bounds, bad_single, bad_perm, bad_norm)};
}

// ---- 4. exact MIPS ----------------------------------------------------------

Outcome mips_exactness() {
  Rng rng(4);
  std::size_t mismatches = 0;
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> rows;
    for (std::size_t i = 0; i < 100; ++i) {
      ids.push_back(fmt("p%03zu", rng.index(1000000)) + fmt("-%03zu", i));
      EmbeddingVector v(16);
      // coarse values make exact score ties common
      for (auto& x : v) x = static_cast<float>(static_cast<int>(rng.index(5)) - 2);
      rows.push_back(v);
    }
    const DenseIndex index(ids, rows);
    EmbeddingVector q(16);
    for (auto& x : q) x = static_cast<float>(static_cast<int>(rng.index(3)) - 1);

    std::vector<std::pair<double, std::string>> full;
    for (std::size_t i = 0; i < 100; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 16; ++j) s += static_cast<double>(rows[i][j]) * q[j];
      full.emplace_back(s, ids[i]);
    }
    std::sort(full.begin(), full.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k : {1u, 5u, 10u, 100u}) {
      const auto got = mips_topk(index, q, k);
      bool same = got.size() == k;
      for (std::size_t i = 0; same && i < k; ++i) same = got[i].id == full[i].second && got[i].s_qp == full[i].first;
      mismatches += same ? 0 : 1;
    }
  }
  return {mismatches == 0, fmt("%zu mismatches over 200 instances x k in {1,5,10,100}", mismatches)};
}

// ---- 5. rerank reductions --------------------------------------------------

Outcome rerank_reductions() {
  Rng rng(5);
  EncoderConfig ec;
  ec.hash_dim = 64;
  ec.dim = 8;
  auto model = EncoderModel::initialize(ec, 5);
  for (std::size_t i = model.head_weight_offset(Tower::query); i < model.params().size(); ++i) {
    model.params()[i] += 0.5 * rng.normal();
  }
  std::size_t bad_lambda = 0, bad_empty = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> rows;
    for (std::size_t i = 0; i < 60; ++i) {
      ids.push_back(fmt("p%02zu", i));
      EmbeddingVector v(8);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      rows.push_back(v);
    }
    const DenseIndex index(ids, rows);
    EmbeddingVector q(8);
    for (auto& x : q) x = static_cast<float>(rng.normal());
    const auto cands = mips_topk(index, q, 1 + rng.index(40));
    std::vector<EntityInput> ents;
    for (std::size_t e = 0; e < 1 + rng.index(5); ++e) {
      EmbeddingVector v(8);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      ents.push_back({fmt("e%zu", e), v});
    }
    auto identity = [&](const std::vector<RerankedHit>& out) {
      if (out.size() != cands.size()) return false;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].id != cands[i].id || out[i].breakdown.combined != cands[i].s_qp) return false;
      }
      return true;
    };
    bad_lambda += identity(rerank(cands, model, index, q, ents, 0.0)) ? 0 : 1;
    bad_empty += identity(rerank(cands, model, index, q, {}, 1.0 + 3.0 * rng.uniform())) ? 0 : 1;
  }
  return {bad_lambda == 0 && bad_empty == 0,
          fmt("non-identity permutations over 100 lists: lambda=0 %zu, no entities %zu", bad_lambda, bad_empty)};
}

// ---- 6/7. training objective -------------------------------------------------

struct TrainFixture {
  std::vector<Passage> passages{make_passage("p1", "the red bell pepper is a vegetable"),
                                make_passage("p2", "a teddy bear is a soft toy"),
                                make_passage("p3", "carrots are orange roots"),
                                make_passage("p4", "the kite flies high in wind"),
                                make_passage("p5", "bears live in forests"),
                                make_passage("p6", "peppers grow in warm places")};
  std::vector<QueryExample> queries{
      {"q1", "what vegetable is this", "a red thing on a table", {"pepper"},
       {{"bell pepper", EntitySource::candidate, true}, {"table", EntitySource::tag, false}}},
      {"q2", "what toy is this", "a child holding something", {"teddy bear"},
       {{"teddy bear", EntitySource::candidate, true}, {"child", EntitySource::caption, false}}},
      {"q3", "what flies here", "sky with clouds", {"kite"}, {}}};
  std::vector<TrainingInstance> instances{{"q1", "p1", "p3", queries[0].entities},
                                          {"q2", "p2", "p5", queries[1].entities},
                                          {"q3", "p4", "p6", {}},
                                          {"q1", "p6", "p2", queries[0].entities}};
};

Outcome gradient_check_criterion() {
  const TrainFixture fx;
  const Corpus corpus(fx.passages);
  EncoderConfig ec;
  ec.hash_dim = 97;
  ec.dim = 6;
  auto model = EncoderModel::initialize(ec, 6);
  Rng rng(60);
  for (std::size_t i = model.head_weight_offset(Tower::query); i < model.params().size(); ++i) {
    model.params()[i] += 0.3 * rng.normal();
  }
  const TrainingData data(corpus, fx.queries, fx.instances, ec.hash_dim);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  TrainConfig cfg;
  GradCheckOptions opt;
  opt.samples = 256;
  opt.step = 1e-4;
  const auto good = gradient_check(model, data, batch, cfg, opt);

  GradCheckOptions bad = opt;
  const std::size_t target = model.head_weight_offset(Tower::passage) + 1;
  bad.coordinates = {target};
  bad.tamper = [target](std::span<double> g) { g[target] += 1.0; };
  const auto tampered = gradient_check(model, data, batch, cfg, bad);
  const bool ok = good.checked >= 200 && good.passed(1e-4) && !tampered.passed(1e-4);
  return {ok, fmt("max rel error %.3g over %zu coordinates (h=1e-4); corrupted gradient rel error %.3g -> %s",
                  good.max_rel_error, good.checked, tampered.max_rel_error,
                  tampered.passed(1e-4) ? "not detected" : "detected")};
}

Outcome loss_oracles() {
  double worst = 0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  track(contrastive_loss(0.7, std::vector<double>{0.7}), std::log(2.0));
  for (std::size_t n : {4u, 12u, 160u}) track(contrastive_loss(0.0, std::vector<double>(n - 1, 0.0)), std::log(double(n)));
  track(contrastive_loss(10.0, std::vector<double>{-10.0}), 2.061153618e-9);
  track(entity_bce(std::vector<double>{0.0}, {true}), std::log(2.0));
  track(entity_bce(std::vector<double>{0.0, 0.0, 0.0}, {true, false, true}), std::log(2.0));
  track(entity_bce(std::vector<double>{2.0}, {true}), 0.126928011);
  track(entity_bce(std::vector<double>{-2.0}, {false}), 0.126928011);
  track(entity_bce({}, {}), 0.0);
  return {worst < 1e-6, fmt("max |diff| %.3g against ln2, lnN and softplus hand values", worst)};
}

// ---- 8/10/12. synthetic pipeline --------------------------------------------

class Workspace {
 public:
  Workspace() {
    root_ = fs::temp_directory_path() / ("efr-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
};

struct PipelineRun {
  fs::path dir;
  double mrr = 0.0;
};

RunConfig pipeline_config(const fs::path& data_conf, const fs::path& dir, std::uint64_t seed,
                          const std::vector<std::string>& overrides) {
  auto c = RunConfig::from_file(data_conf);
  c.set("output_dir", dir.string());
  c.set("seed", std::to_string(seed));
  for (const auto& o : overrides) c.assign(o);
  return c;
}

PipelineRun run_pipeline(const fs::path& data_conf, const fs::path& dir, std::uint64_t seed,
                         const std::vector<std::string>& overrides) {
  const auto c = pipeline_config(data_conf, dir, seed, overrides);
  std::ostringstream log;
  cmd_index(c, log);
  cmd_mine(c, log);
  cmd_train(c, log);
  cmd_index(c, log);
  cmd_retrieve(c, log);
  cmd_eval(c, log);
  const auto report = nlohmann::json::parse(read_file(c.path("report")));
  return {dir, report["runs"][0]["mrr_at_k"].get<double>()};
}

const std::vector<std::string> kBackbone{"w_qpe=0", "w_ent=0", "lambda=0"};

struct Replication {
  fs::path data_conf;
  std::vector<std::pair<std::uint64_t, fs::path>> full_runs;
  std::size_t passages = 0, test_queries = 0;
  std::vector<double> full, backbone;
  double seconds = 0;
};

Replication replicate(const Workspace& ws) {
  Replication r;
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig g;
  g.set("output_dir", (ws.root() / "data").string());
  std::ostringstream log;
  cmd_gen_synth(g, log);
  r.data_conf = ws.root() / "data" / "efr.conf";
  r.passages = load_corpus(ws.root() / "data" / "corpus.jsonl").size();
  r.test_queries = load_queries(ws.root() / "data" / "test_queries.jsonl").size();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto full = run_pipeline(r.data_conf, ws.root() / fmt("full-%d", int(seed)), seed, {});
    const auto base = run_pipeline(r.data_conf, ws.root() / fmt("backbone-%d", int(seed)), seed, kBackbone);
    r.full.push_back(full.mrr);
    r.backbone.push_back(base.mrr);
    r.full_runs.emplace_back(seed, full.dir);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

Outcome directional_replication(const Replication& r) {
  const double gap = mean(r.full) - mean(r.backbone);
  const bool sized = r.passages >= 2000 && r.test_queries >= 200;
  const bool ok = sized && gap >= 0.02 && r.seconds < 600.0;
  std::string seeds;
  for (std::size_t i = 0; i < r.full.size(); ++i) seeds += fmt(" %.4f/%.4f", r.full[i], r.backbone[i]);
  return {ok, fmt("MRR@5 full %.4f vs backbone %.4f, gap %.4f (need >= 0.02); per seed full/backbone:%s; "
                  "%zu passages, %zu test queries; %.1f s on 1 thread (limit 600)",
                  mean(r.full), mean(r.backbone), gap, seeds.c_str(), r.passages, r.test_queries, r.seconds)};
}

using Profile = std::vector<std::pair<double, double>>;  // (lambda, MRR@5), ascending lambda

Profile sweep_profile(const fs::path& data_conf, const fs::path& dir, std::uint64_t seed) {
  const auto c = pipeline_config(data_conf, dir, seed, {});
  std::ostringstream log;
  cmd_sweep_lambda(c, log);
  const auto doc = nlohmann::json::parse(read_file(dir / "sweep.json"));
  Profile points;
  for (const auto& p : doc["points"]) points.emplace_back(p["lambda"].get<double>(), p["mrr_at_k"].get<double>());
  std::sort(points.begin(), points.end());
  return points;
}

// Each seed: no lambda > 0 point more than 0.005 below that seed's lambda = 0.
// Seed-averaged profile: no step down of more than 0.005 (monotone, then flat).
Outcome lambda_sweep(const Replication& r) {
  std::vector<Profile> profiles;
  for (const auto& [seed, dir] : r.full_runs) profiles.push_back(sweep_profile(r.data_conf, dir, seed));
  const auto& first = profiles.front();
  if (first.size() != 6 || first.front().first != 0.0) return {false, "sweep must cover six lambdas starting at 0"};

  bool above_base = true;
  std::string per_seed;
  for (std::size_t s = 0; s < profiles.size(); ++s) {
    per_seed += fmt(" s%d[", int(r.full_runs[s].first));
    for (const auto& [lambda, mrr] : profiles[s]) {
      if (mrr < profiles[s].front().second - 0.005) above_base = false;
      per_seed += fmt(" %.4f", mrr);
    }
    per_seed += " ]";
  }
  Profile avg = first;
  for (std::size_t i = 0; i < avg.size(); ++i) {
    avg[i].second = 0;
    for (const auto& p : profiles) avg[i].second += p[i].second / double(profiles.size());
  }
  bool no_drop = true;
  std::string mean_profile;
  for (std::size_t i = 0; i < avg.size(); ++i) {
    mean_profile += fmt(" %g:%.4f", avg[i].first, avg[i].second);
    if (i > 0 && avg[i].second < avg[i - 1].second - 0.005) no_drop = false;
  }
  return {above_base && no_drop,
          fmt("mean profile%s; any seed below its baseline by > 0.005: %s; mean step drop > 0.005: %s; "
              "per seed (lambda 0..4):%s",
              mean_profile.c_str(), above_base ? "no" : "yes", no_drop ? "no" : "yes", per_seed.c_str())};
}

Outcome determinism(const Replication& r, const Workspace& ws) {
  const std::vector<std::string> shorter{"epochs=2"};
  const auto dir = ws.root() / "determinism";
  const std::array<const char*, 4> files{"sparse.efsi", "passages.efem", "model.efck", "run.trec"};
  run_pipeline(r.data_conf, dir, 9, shorter);
  std::map<std::string, std::string> first;
  for (const char* f : files) first[f] = read_file(dir / f);
  fs::remove_all(dir);
  run_pipeline(r.data_conf, dir, 9, shorter);
  std::string differing;
  for (const char* f : files) {
    if (read_file(dir / f) != first[f]) differing += std::string(" ") + f;
  }
  return {differing.empty(), differing.empty() ? "index files, checkpoint and run file bit-identical across two executions"
                                               : "differing:" + differing};
}

// ---- 9. oracle mining fixtures ----------------------------------------------

Outcome oracle_mining_sanity() {
  const std::vector<Passage> promote{
      make_passage("d1", "vegetable market stalls"), make_passage("d2", "this vegetable is green"),
      make_passage("d3", "what a vegetable"),        make_passage("d4", "vegetable garden"),
      make_passage("d5", "is this a vegetable"),     make_passage("d6", "vegetable prices rise"),
      make_passage("ans", "the bell pepper also called capsicum")};
  const std::vector<Passage> demote{make_passage("ans", "this vegetable is capsicum"),
                                    make_passage("toy", "teddy bear vegetable"), make_passage("x1", "a quiet river"),
                                    make_passage("x2", "mountain air")};
  const QueryExample q{"q", "what vegetable is this", "", {"capsicum"}, {}};

  const auto pi = InvertedIndex::build(promote);
  const Corpus pc(promote);
  const auto planted = entity_gain(pi, pc, q, {"bell pepper", EntitySource::candidate, {}}, 5, 0.8);

  const auto di = InvertedIndex::build(demote);
  const Corpus dc(demote);
  const auto distractor = entity_gain(di, dc, q, {"teddy bear", EntitySource::tag, {}}, 5, 0.8);
  const auto unrelated = entity_gain(di, dc, q, {"zzyzx", EntitySource::tag, {}}, 5, 0.8);

  // absent -> rank 1 is +1; rank 1 -> rank 2 is 1/2 - 1 = -1/2
  const bool ok = planted.is_oracle && std::abs(planted.gain - 1.0) < 1e-12 && !distractor.is_oracle &&
                  std::abs(distractor.gain + 0.5) < 1e-12 && unrelated.gain == 0.0 && !unrelated.is_oracle;
  return {ok, fmt("planted S(e)=%.4f (oracle %s), distractor S(e)=%.4f, unrelated S(e)=%.4f", planted.gain,
                  planted.is_oracle ? "yes" : "no", distractor.gain, unrelated.gain)};
}

// ---- 11. metrics ------------------------------------------------------------

Outcome metric_permutations() {
  const Corpus c(std::vector<Passage>{make_passage("g1", "the bell pepper"), make_passage("g2", "pepper, red"),
                                      make_passage("n1", "carrot"), make_passage("n2", "peppers"),
                                      make_passage("n3", "a kite")});
  const std::vector<QueryExample> qs{{"q", "what", "", {"pepper"}, {}}};
  std::array<std::string, 5> items{"g1", "g2", "n1", "n2", "n3"};
  std::size_t perms = 0, wrong = 0;
  do {
    QueryRun run{"q", {}};
    std::size_t first = 0, hits = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      run.entries.push_back({items[i], i + 1, 0.0});
      if (items[i][0] == 'g') {
        ++hits;
        if (!first) first = i + 1;
      }
    }
    const std::vector<QueryRun> runs{run};
    const auto rep = evaluate_run("p", runs, qs, c, 5);
    if (std::abs(rep.mrr_at_k - 1.0 / double(first)) > 1e-12 || std::abs(rep.p_at_k - double(hits) / 5.0) > 1e-12) {
      ++wrong;
    }
    ++perms;
  } while (std::next_permutation(items.begin(), items.end()));
  return {perms == 120 && wrong == 0, fmt("%zu of %zu permutations disagree with hand MRR@5/P@5", wrong, perms)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "srr hand values", srr_hand_values);
  report(2, "bm25 reference", bm25_oracle);
  report(3, "entity-score properties", qpe_properties);
  report(4, "mips exactness", mips_exactness);
  report(5, "rerank reductions", rerank_reductions);
  report(6, "gradient check", gradient_check_criterion);
  report(7, "loss oracles", loss_oracles);

  Workspace ws;
  Replication rep;
  bool replicated = false;
  std::string replication_error;
  {
#ifdef EFR_HAS_OPENMP
    const int threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    try {
      rep = replicate(ws);
      replicated = true;
    } catch (const std::exception& e) {
      replication_error = e.what();
    }
#ifdef EFR_HAS_OPENMP
    omp_set_num_threads(threads);
#endif
  }
  auto needs_replication = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!replicated) return {false, "synthetic pipeline failed: " + replication_error};
      return fn();
    };
  };
  report(8, "directional replication", needs_replication([&] { return directional_replication(rep); }));
  report(9, "oracle mining sanity", oracle_mining_sanity);
  report(10, "lambda sweep robustness", needs_replication([&] { return lambda_sweep(rep); }));
  report(11, "metric permutations", metric_permutations);
  report(12, "determinism", needs_replication([&] { return determinism(rep, ws); }));

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
