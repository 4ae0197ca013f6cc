#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "efr/encoder.hpp"

namespace efr {

/// Inner product accumulated in double. Throws InvalidArgument on mismatch.
double score_qp(std::span<const float> f_q, std::span<const float> f_p);
double dot(std::span<const double> a, std::span<const double> b);

/// proj_q(f_q) . proj_e(f_e)
double score_qe(const EncoderModel& model, std::span<const float> f_q, std::span<const float> f_e);
/// proj_p(f_p) . proj_e(f_e)
double score_pe(const EncoderModel& model, std::span<const float> f_p, std::span<const float> f_e);

double sigmoid(double x);

/// Sigmoid-weighted mean of passage-entity scores, weights sigma(s_qe).
/// Zero for an empty entity set. Throws on length mismatch.
double score_qpe(std::span<const double> s_qe, std::span<const double> s_pe);

/// Normalized weights sigma(s_qe_i) / sum_j sigma(s_qe_j).
std::vector<double> entity_weights(std::span<const double> s_qe);

inline double combined_score(double s_qp, double s_qpe, double lambda) {
  return s_qp + lambda * s_qpe;
}

/// Row-per-passage embedding matrix for exact inner-product search.
class DenseIndex {
 public:
  DenseIndex() = default;
  /// Throws InvalidArgument on duplicate ids, ragged rows or non-finite values.
  DenseIndex(std::vector<std::string> ids, std::span<const EmbeddingVector> rows);
  static DenseIndex from_map(const EmbeddingMap& rows);
  EmbeddingMap to_map() const;

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  /// Row number of an id, or throws InvalidArgument.
  std::size_t row_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> by_id_;  // row numbers sorted by id
};

struct Candidate {
  std::string id;
  double s_qp = 0.0;
};

/// Exact top-k by inner product, ties by ascending id. Rows are split
/// across OpenMP threads and the partial top-k lists merged.
std::vector<Candidate> mips_topk(const DenseIndex& index, std::span<const float> f_q, std::size_t k);
/// Single-threaded reference for mips_topk.
std::vector<Candidate> mips_topk_serial(const DenseIndex& index, std::span<const float> f_q,
                                        std::size_t k);

struct EntityTerm {
  std::string text;
  double s_qe = 0.0;
  double importance = 0.0;  // sigmoid(s_qe)
  double s_pe = 0.0;
};

struct ScoreBreakdown {
  double s_qp = 0.0;
  double s_qpe = 0.0;
  double combined = 0.0;
  std::vector<EntityTerm> per_entity;
};

struct RerankedHit {
  std::string id;
  std::size_t rank = 0;
  ScoreBreakdown breakdown;
};

struct EntityInput {
  std::string text;
  EmbeddingVector f_e;
};

/// Rescores MIPS candidates with s_qp + lambda * s_qpe, sorted descending
/// with ties by ascending id. s_qp is reused from the candidates.
std::vector<RerankedHit> rerank(std::span<const Candidate> candidates, const EncoderModel& model,
                                const DenseIndex& passages, std::span<const float> f_q,
                                std::span<const EntityInput> entities, double lambda);

/// TREC run lines "qid Q0 pid rank score tag".
struct RunEntry {
  std::string passage_id;
  std::size_t rank = 0;
  double score = 0.0;
};
struct QueryRun {
  std::string query_id;
  std::vector<RunEntry> entries;
};

void write_trec_run(const std::filesystem::path& path, std::span<const QueryRun> runs,
                    const std::string& tag);
std::string format_trec_run(std::span<const QueryRun> runs, const std::string& tag);
/// Queries in first-appearance order, entries sorted by rank.
std::vector<QueryRun> read_trec_run(const std::filesystem::path& path);

/// JSON-lines sidecar with one ScoreBreakdown per (query, passage).
void write_breakdown_sidecar(const std::filesystem::path& path,
                             std::span<const std::pair<std::string, std::vector<RerankedHit>>> runs,
                             double lambda);

}  // namespace efr
