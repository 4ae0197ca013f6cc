#include "efr/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "efr/error.hpp"
#include "efr/rng.hpp"
#include "efr/text.hpp"

namespace efr {

double reciprocal_rank_at_k(std::span<const std::string> ranked, const PhraseMatcher& gold,
                            const Corpus& corpus, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (gold.matches(corpus.normalized(corpus.index_of(ranked[i])))) {
      return 1.0 / static_cast<double>(i + 1);
    }
  }
  return 0.0;
}

double precision_at_k(std::span<const std::string> ranked, const PhraseMatcher& gold,
                      const Corpus& corpus, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const std::size_t n = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold.matches(corpus.normalized(corpus.index_of(ranked[i])))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

namespace {

std::vector<std::string> ids_of(const QueryRun& r) {
  std::vector<std::string> ids;
  ids.reserve(r.entries.size());
  for (const auto& e : r.entries) ids.push_back(e.passage_id);
  return ids;
}

std::map<std::string, const QueryRun*> index_run(std::span<const QueryRun> run,
                                                 std::span<const QueryExample> queries) {
  std::set<std::string> known;
  for (const auto& q : queries) known.insert(q.id);
  std::map<std::string, const QueryRun*> out;
  for (const auto& r : run) {
    if (!known.contains(r.query_id)) {
      throw InvalidArgument("run contains query " + r.query_id + " with no gold definition");
    }
    out[r.query_id] = &r;
  }
  return out;
}

}  // namespace

MetricReport evaluate_run(const std::string& name, std::span<const QueryRun> run,
                          std::span<const QueryExample> queries, const Corpus& corpus, std::size_t k,
                          const std::map<std::string, std::vector<std::string>>& oracle) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const auto by_query = index_run(run, queries);
  MetricReport rep;
  rep.name = name;
  rep.k = k;
  for (const auto& q : queries) {
    QueryMetrics row;
    row.query_id = q.id;
    auto it = by_query.find(q.id);
    if (it != by_query.end()) {
      const auto ids = ids_of(*it->second);
      const auto gold = PhraseMatcher::for_answers(q.answers, corpus.stem());
      row.reciprocal_rank = reciprocal_rank_at_k(ids, gold, corpus, k);
      row.precision = precision_at_k(ids, gold, corpus, k);
    }
    rep.mrr_at_k += row.reciprocal_rank;
    rep.p_at_k += row.precision;
    rep.rows.push_back(std::move(row));
  }
  if (!queries.empty()) {
    rep.mrr_at_k /= static_cast<double>(queries.size());
    rep.p_at_k /= static_cast<double>(queries.size());
  }
  if (!oracle.empty()) {
    rep.oracle_recall = oracle_entity_recall_at_k(run, oracle, corpus, k);
    for (auto& row : rep.rows) {
      auto oit = oracle.find(row.query_id);
      if (oit == oracle.end()) continue;
      const auto rit = by_query.find(row.query_id);
      row.oracle_total = oit->second.size();
      if (rit == by_query.end()) continue;
      const std::vector<QueryRun> one{*rit->second};
      row.oracle_found = oracle_entity_recall_at_k(one, {{row.query_id, oit->second}}, corpus, k).found;
    }
  }
  return rep;
}

double mrr_at_k(std::span<const QueryRun> run, std::span<const QueryExample> queries,
                const Corpus& corpus, std::size_t k) {
  return evaluate_run("", run, queries, corpus, k).mrr_at_k;
}

double p_at_k(std::span<const QueryRun> run, std::span<const QueryExample> queries,
              const Corpus& corpus, std::size_t k) {
  return evaluate_run("", run, queries, corpus, k).p_at_k;
}

OracleRecall oracle_entity_recall_at_k(std::span<const QueryRun> run,
                                       const std::map<std::string, std::vector<std::string>>& oracle,
                                       const Corpus& corpus, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  std::map<std::string, const QueryRun*> by_query;
  for (const auto& r : run) by_query[r.query_id] = &r;

  OracleRecall out;
  std::size_t queries_with_oracle = 0;
  for (const auto& [qid, entities] : oracle) {
    if (entities.empty()) continue;
    ++queries_with_oracle;
    std::size_t found = 0;
    auto it = by_query.find(qid);
    if (it != by_query.end()) {
      const auto& entries = it->second->entries;
      const std::size_t n = std::min(k, entries.size());
      for (const auto& e : entities) {
        const PhraseMatcher m(std::span<const std::string>(&e, 1), corpus.stem());
        for (std::size_t i = 0; i < n; ++i) {
          if (m.matches(corpus.normalized(corpus.index_of(entries[i].passage_id)))) {
            ++found;
            break;
          }
        }
      }
    }
    out.found += found;
    out.total += entities.size();
    out.macro += static_cast<double>(found) / static_cast<double>(entities.size());
  }
  out.defined = out.total > 0;
  if (out.defined) {
    out.micro = static_cast<double>(out.found) / static_cast<double>(out.total);
    out.macro /= static_cast<double>(queries_with_oracle);
  }
  return out;
}

std::set<EntitySource> parse_source_set(const std::string& spec) {
  if (spec == "all") return {kAllSources.begin(), kAllSources.end()};
  if (spec == "none" || spec.empty()) return {};
  if (spec == "image") return kImageSources;
  if (spec == "question") return kQuestionSources;
  std::set<EntitySource> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(parse_entity_source(item));
  }
  return out;
}

std::vector<QueryExample> ablate_entity_sources(std::span<const QueryExample> queries,
                                                const std::set<EntitySource>& keep) {
  std::vector<QueryExample> out(queries.begin(), queries.end());
  for (auto& q : out) {
    std::erase_if(q.entities, [&](const Entity& e) { return !keep.contains(e.source); });
  }
  return out;
}

bool is_hard_query(const QueryExample& q, bool stem) {
  std::set<std::string> ents;
  for (const auto& e : q.entities) ents.insert(normalize_text(e.text, stem));
  for (const auto& a : q.answers) {
    const auto n = normalize_text(a, stem);
    if (!n.empty() && ents.contains(n)) return false;
  }
  return true;
}

std::vector<QueryExample> hard_subset(std::span<const QueryExample> queries, bool stem) {
  std::vector<QueryExample> out;
  for (const auto& q : queries) {
    if (is_hard_query(q, stem)) out.push_back(q);
  }
  return out;
}

std::pair<std::vector<QueryExample>, std::vector<QueryExample>> split_half(
    std::span<const QueryExample> queries, std::uint64_t seed) {
  std::vector<std::size_t> order(queries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t half = (order.size() + 1) / 2;
  std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  std::pair<std::vector<QueryExample>, std::vector<QueryExample>> out;
  for (auto i : first) out.first.push_back(queries[i]);
  for (auto i : second) out.second.push_back(queries[i]);
  return out;
}

BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 std::size_t resamples, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument("paired_bootstrap: need equal, nonempty samples");
  }
  const std::size_t n = a.size();
  BootstrapResult out;
  for (std::size_t i = 0; i < n; ++i) out.mean_difference += a[i] - b[i];
  out.mean_difference /= static_cast<double>(n);
  if (resamples == 0) return out;
  Rng rng(seed);
  std::size_t not_better = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = rng.index(n);
      diff += a[j] - b[j];
    }
    if (diff <= 0.0) ++not_better;
  }
  out.p_value = static_cast<double>(not_better) / static_cast<double>(resamples);
  return out;
}

std::string report_json(std::span<const MetricReport> reports, const std::string& provenance) {
  using ojson = nlohmann::ordered_json;
  ojson root;
  if (!provenance.empty()) root["provenance"] = provenance;
  root["runs"] = ojson::array();
  for (const auto& r : reports) {
    ojson j;
    j["name"] = r.name;
    j["k"] = r.k;
    j["mrr_at_k"] = r.mrr_at_k;
    j["p_at_k"] = r.p_at_k;
    j["oracle_entity_recall_at_k"] = r.oracle_recall.micro;
    j["oracle_entity_recall_macro"] = r.oracle_recall.macro;
    j["oracle_entity_recall_defined"] = r.oracle_recall.defined;
    j["queries"] = ojson::array();
    for (const auto& row : r.rows) {
      j["queries"].push_back({{"query_id", row.query_id},
                              {"rr", row.reciprocal_rank},
                              {"precision", row.precision},
                              {"oracle_total", row.oracle_total},
                              {"oracle_found", row.oracle_found}});
    }
    root["runs"].push_back(std::move(j));
  }
  return root.dump(2) + "\n";
}

std::string report_table(std::span<const MetricReport> reports) {
  std::size_t width = 4;
  for (const auto& r : reports) width = std::max(width, r.name.size());
  std::string out;
  char line[512];
  const std::size_t k = reports.empty() ? 5 : reports.front().k;
  std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %10s  %10s\n", static_cast<int>(width), "run",
                ("MRR@" + std::to_string(k)).c_str(), ("P@" + std::to_string(k)).c_str(), "OER-micro",
                "OER-macro");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-*s  %8.4f  %8.4f  %10s  %10s\n", static_cast<int>(width),
                  r.name.c_str(), r.mrr_at_k, r.p_at_k,
                  r.oracle_recall.defined ? std::to_string(r.oracle_recall.micro).substr(0, 6).c_str() : "n/a",
                  r.oracle_recall.defined ? std::to_string(r.oracle_recall.macro).substr(0, 6).c_str() : "n/a");
    out += line;
  }
  return out;
}

}  // namespace efr
