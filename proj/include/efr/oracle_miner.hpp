#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "efr/corpus.hpp"
#include "efr/sparse_index.hpp"

namespace efr {

/// Summed reciprocal ranking of an answer over a ranked list:
/// sum over positions i of 1[answer in p_i] / i. Hits must carry ranks 1..K.
double srr(std::span<const SparseHit> ranked, const PhraseMatcher& answers, const Corpus& corpus);
double srr(std::span<const SparseHit> ranked, std::span<const std::string> answers,
           const Corpus& corpus);

struct EntityScore {
  Entity entity;
  double gain = 0.0;
  bool is_oracle = false;
};

struct MinerConfig {
  std::size_t srr_depth = 5;     // K in the SRR sum
  std::size_t init_depth = 100;  // BM25 depth scanned for positives/negatives
  std::size_t n_pos = 5;
  std::size_t n_neg = 25;
  double theta = 0.8;
  std::uint64_t seed = 13;
};

/// S(e) = SRR(question + entity) - SRR(question), with is_oracle = S(e) > theta.
EntityScore entity_gain(const InvertedIndex& index, const Corpus& corpus, const QueryExample& query,
                        const Entity& entity, std::size_t srr_depth, double theta = 0.8);

struct TrainingInstance {
  std::string query_id;
  std::string positive_id;
  std::string negative_id;
  std::vector<Entity> entities;  // oracle_label set
};

struct QueryMining {
  std::string query_id;
  double srr_init = 0.0;
  std::vector<EntityScore> entity_scores;
  std::vector<std::string> positives;  // after oracle augmentation
  std::vector<std::string> negatives;
  bool dropped = false;
};

struct MiningResult {
  std::vector<TrainingInstance> instances;
  std::vector<QueryMining> per_query;
  std::size_t dropped_queries = 0;
};

/// Mines oracle entities and positive/negative pairs for every query.
/// Parallel over queries; output order follows query order and does not
/// depend on the thread count. Throws InvalidArgument on an empty query list.
MiningResult mine_training_set(const InvertedIndex& index, const Corpus& corpus,
                               std::span<const QueryExample> queries, const MinerConfig& config);

/// Mining of a single query with its own pairing stream.
QueryMining mine_query(const InvertedIndex& index, const Corpus& corpus, const QueryExample& query,
                       const MinerConfig& config);

/// Deterministic pairing: both lists shuffled under `seed`, then the shorter
/// one is cycled so every passage is used.
std::vector<std::pair<std::string, std::string>> pair_up(std::vector<std::string> positives,
                                                         std::vector<std::string> negatives,
                                                         std::uint64_t seed);

void save_training_set(const std::filesystem::path& path, std::span<const TrainingInstance> set);
std::vector<TrainingInstance> load_training_set(const std::filesystem::path& path);

void save_entity_scores(const std::filesystem::path& path, std::span<const QueryMining> mined);
/// query id -> scored entities.
std::vector<std::pair<std::string, std::vector<EntityScore>>> load_entity_scores(
    const std::filesystem::path& path);

}  // namespace efr
