#include "efr/oracle_miner.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"
#include "efr/rng.hpp"

namespace efr {

using ojson = nlohmann::ordered_json;

double srr(std::span<const SparseHit> ranked, const PhraseMatcher& answers, const Corpus& corpus) {
  double total = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].rank != i + 1) {
      throw InvalidArgument("srr: ranks must be consecutive from 1");
    }
    if (answers.matches(corpus.normalized(corpus.index_of(ranked[i].passage_id)))) {
      total += 1.0 / static_cast<double>(i + 1);
    }
  }
  return total;
}

double srr(std::span<const SparseHit> ranked, std::span<const std::string> answers,
           const Corpus& corpus) {
  return srr(ranked, PhraseMatcher::for_answers(answers, corpus.stem()), corpus);
}

namespace {

std::span<const SparseHit> head(const std::vector<SparseHit>& hits, std::size_t k) {
  return std::span<const SparseHit>(hits.data(), std::min(k, hits.size()));
}

}  // namespace

EntityScore entity_gain(const InvertedIndex& index, const Corpus& corpus, const QueryExample& query,
                        const Entity& entity, std::size_t srr_depth, double theta) {
  if (srr_depth == 0) throw InvalidArgument("entity_gain: K must be >= 1");
  const auto answers = PhraseMatcher::for_answers(query.answers, corpus.stem());
  const auto base = index.search(index.query_terms(query.question), srr_depth);
  const auto aug = index.search(augment_query(query.question, entity, index.text_options()),
                                srr_depth);
  EntityScore s{entity, srr(aug, answers, corpus) - srr(base, answers, corpus), false};
  s.is_oracle = s.gain > theta;
  s.entity.oracle_label = s.is_oracle;
  return s;
}

std::vector<std::pair<std::string, std::string>> pair_up(std::vector<std::string> positives,
                                                         std::vector<std::string> negatives,
                                                         std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> out;
  if (positives.empty() || negatives.empty()) return out;
  Rng rng(seed);
  rng.shuffle(positives);
  rng.shuffle(negatives);
  const std::size_t n = std::max(positives.size(), negatives.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(positives[i % positives.size()], negatives[i % negatives.size()]);
  }
  return out;
}

QueryMining mine_query(const InvertedIndex& index, const Corpus& corpus, const QueryExample& query,
                       const MinerConfig& config) {
  const auto answers = PhraseMatcher::for_answers(query.answers, corpus.stem());
  const std::size_t depth = std::max(config.init_depth, config.srr_depth);
  auto contains = [&](const SparseHit& h, const PhraseMatcher& m) {
    return m.matches(corpus.normalized(corpus.index_of(h.passage_id)));
  };

  QueryMining out;
  out.query_id = query.id;
  const auto init = index.search(index.query_terms(query.question), depth);
  out.srr_init = srr(head(init, config.srr_depth), answers, corpus);

  for (const auto& h : init) {
    if (contains(h, answers)) {
      if (out.positives.size() < config.n_pos) out.positives.push_back(h.passage_id);
    } else if (out.negatives.size() < config.n_neg) {
      out.negatives.push_back(h.passage_id);
    }
  }

  for (const auto& e : query.entities) {
    const auto aug = index.search(augment_query(query.question, e, index.text_options()), depth);
    EntityScore s{e, srr(head(aug, config.srr_depth), answers, corpus) - out.srr_init, false};
    s.is_oracle = s.gain > config.theta;
    s.entity.oracle_label = s.is_oracle;
    if (s.is_oracle) {
      const PhraseMatcher ent(std::span<const std::string>(&e.text, 1), corpus.stem());
      for (const auto& h : aug) {
        if (contains(h, answers) && contains(h, ent)) {
          if (std::find(out.positives.begin(), out.positives.end(), h.passage_id) ==
              out.positives.end()) {
            out.positives.push_back(h.passage_id);
          }
          break;
        }
      }
    }
    out.entity_scores.push_back(std::move(s));
  }
  out.dropped = out.positives.empty() || out.negatives.empty();
  return out;
}

MiningResult mine_training_set(const InvertedIndex& index, const Corpus& corpus,
                               std::span<const QueryExample> queries, const MinerConfig& config) {
  if (queries.empty()) throw InvalidArgument("mine_training_set: no queries");
  if (config.n_pos == 0 || config.n_neg == 0) {
    throw InvalidArgument("mine_training_set: n_pos and n_neg must be >= 1");
  }
  MiningResult result;
  result.per_query.resize(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 2)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    result.per_query[u] = mine_query(index, corpus, queries[u], config);
  }

  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& m = result.per_query[i];
    if (m.dropped) {
      ++result.dropped_queries;
      continue;
    }
    std::vector<Entity> labelled;
    labelled.reserve(m.entity_scores.size());
    for (const auto& s : m.entity_scores) labelled.push_back(s.entity);
    const auto seed = derive_seed(config.seed, fnv1a(queries[i].id));
    for (auto& [pos, neg] : pair_up(m.positives, m.negatives, seed)) {
      result.instances.push_back({queries[i].id, std::move(pos), std::move(neg), labelled});
    }
  }
  if (result.dropped_queries > 0) {
    std::clog << "mine: dropped " << result.dropped_queries << " of " << queries.size()
              << " queries without an answer-bearing positive or a negative\n";
  }
  return result;
}

namespace {

ojson entity_json(const Entity& e) {
  ojson j;
  j["text"] = e.text;
  j["source"] = std::string(to_string(e.source));
  j["oracle"] = e.oracle_label.value_or(false);
  return j;
}

template <typename Fn>
void read_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(ojson::parse(line));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ": malformed record at line " + std::to_string(lineno) +
                        ": " + e.what());
    }
  }
}

}  // namespace

void save_training_set(const std::filesystem::path& path, std::span<const TrainingInstance> set) {
  std::string buf;
  for (const auto& t : set) {
    ojson j;
    j["query_id"] = t.query_id;
    j["positive_id"] = t.positive_id;
    j["negative_id"] = t.negative_id;
    j["entities"] = ojson::array();
    for (const auto& e : t.entities) j["entities"].push_back(entity_json(e));
    buf += j.dump() + '\n';
  }
  write_file(path, buf);
}

std::vector<TrainingInstance> load_training_set(const std::filesystem::path& path) {
  std::vector<TrainingInstance> out;
  read_jsonl(path, [&](const ojson& j) {
    TrainingInstance t;
    t.query_id = j.at("query_id").get<std::string>();
    t.positive_id = j.at("positive_id").get<std::string>();
    t.negative_id = j.at("negative_id").get<std::string>();
    for (const auto& e : j.at("entities")) {
      Entity ent;
      ent.text = e.at("text").get<std::string>();
      ent.source = parse_entity_source(e.at("source").get<std::string>());
      ent.oracle_label = e.value("oracle", false);
      t.entities.push_back(std::move(ent));
    }
    out.push_back(std::move(t));
  });
  return out;
}

void save_entity_scores(const std::filesystem::path& path, std::span<const QueryMining> mined) {
  std::string buf;
  for (const auto& m : mined) {
    for (const auto& s : m.entity_scores) {
      ojson j;
      j["query_id"] = m.query_id;
      j["text"] = s.entity.text;
      j["source"] = std::string(to_string(s.entity.source));
      j["gain"] = s.gain;
      j["oracle"] = s.is_oracle;
      buf += j.dump() + '\n';
    }
  }
  write_file(path, buf);
}

std::vector<std::pair<std::string, std::vector<EntityScore>>> load_entity_scores(
    const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::vector<EntityScore>>> out;
  std::map<std::string, std::size_t> pos;
  read_jsonl(path, [&](const ojson& j) {
    const auto qid = j.at("query_id").get<std::string>();
    auto [it, fresh] = pos.emplace(qid, out.size());
    if (fresh) out.emplace_back(qid, std::vector<EntityScore>{});
    EntityScore s;
    s.entity.text = j.at("text").get<std::string>();
    s.entity.source = parse_entity_source(j.at("source").get<std::string>());
    s.gain = j.at("gain").get<double>();
    s.is_oracle = j.at("oracle").get<bool>();
    s.entity.oracle_label = s.is_oracle;
    out[it->second].second.push_back(std::move(s));
  });
  return out;
}

}  // namespace efr
