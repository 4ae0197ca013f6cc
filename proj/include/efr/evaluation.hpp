#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "efr/corpus.hpp"
#include "efr/scorer.hpp"

namespace efr {

/// 1/rank of the first gold passage within the top k, else 0.
double reciprocal_rank_at_k(std::span<const std::string> ranked, const PhraseMatcher& gold,
                            const Corpus& corpus, std::size_t k);
/// Gold passages among the top k, divided by k (short lists count as padded).
double precision_at_k(std::span<const std::string> ranked, const PhraseMatcher& gold,
                      const Corpus& corpus, std::size_t k);

/// Means over every query in `queries`; a query absent from the run scores 0.
/// Throws InvalidArgument if the run names a query not in `queries`, or k == 0.
double mrr_at_k(std::span<const QueryRun> run, std::span<const QueryExample> queries,
                const Corpus& corpus, std::size_t k);
double p_at_k(std::span<const QueryRun> run, std::span<const QueryExample> queries,
              const Corpus& corpus, std::size_t k);

struct OracleRecall {
  double micro = 0.0;  // found / total over all queries
  double macro = 0.0;  // mean of per-query fractions over queries with oracle entities
  std::size_t found = 0;
  std::size_t total = 0;
  bool defined = false;  // false when no query has oracle entities
};

/// Fraction of oracle entities whose normalized tokens occur in at least
/// one top-k passage of their query.
OracleRecall oracle_entity_recall_at_k(std::span<const QueryRun> run,
                                       const std::map<std::string, std::vector<std::string>>& oracle,
                                       const Corpus& corpus, std::size_t k);

inline const std::set<EntitySource> kImageSources{EntitySource::tag, EntitySource::wikidata,
                                                  EntitySource::caption};
inline const std::set<EntitySource> kQuestionSources{
    EntitySource::question, EntitySource::sub_question, EntitySource::candidate};

/// Parses "all", "none", "image", "question" or a comma list of source names.
std::set<EntitySource> parse_source_set(const std::string& spec);

/// Keeps only entities whose source is in `keep`.
std::vector<QueryExample> ablate_entity_sources(std::span<const QueryExample> queries,
                                                const std::set<EntitySource>& keep);

/// True when no normalized answer equals the normalized text of any entity.
bool is_hard_query(const QueryExample& q, bool stem = false);
std::vector<QueryExample> hard_subset(std::span<const QueryExample> queries, bool stem = false);

/// Seeded even split into (validation, test) halves.
std::pair<std::vector<QueryExample>, std::vector<QueryExample>> split_half(
    std::span<const QueryExample> queries, std::uint64_t seed);

struct BootstrapResult {
  double mean_difference = 0.0;  // mean(a - b)
  double p_value = 0.0;          // share of resamples with mean(a - b) <= 0
};
/// Paired bootstrap over per-query values.
BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 std::size_t resamples, std::uint64_t seed);

struct QueryMetrics {
  std::string query_id;
  double reciprocal_rank = 0.0;
  double precision = 0.0;
  std::size_t oracle_total = 0;
  std::size_t oracle_found = 0;
};

struct MetricReport {
  std::string name;
  std::size_t k = 5;
  double mrr_at_k = 0.0;
  double p_at_k = 0.0;
  OracleRecall oracle_recall;
  std::vector<QueryMetrics> rows;
};

MetricReport evaluate_run(const std::string& name, std::span<const QueryRun> run,
                          std::span<const QueryExample> queries, const Corpus& corpus, std::size_t k,
                          const std::map<std::string, std::vector<std::string>>& oracle = {});

std::string report_json(std::span<const MetricReport> reports, const std::string& provenance = {});
std::string report_table(std::span<const MetricReport> reports);

}  // namespace efr
