#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "efr/corpus.hpp"
#include "efr/text.hpp"

namespace efr {

struct Bm25Params {
  double k1 = 1.1;
  double b = 0.4;
};

struct SparseHit {
  std::string passage_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Query term bag: term -> query term frequency. Ordered so score
/// accumulation order is fixed.
using TermBag = std::map<std::string, std::uint32_t>;

TermBag make_term_bag(std::span<const std::string> tokens);

/// Question terms plus entity terms, as a bag (word order is irrelevant to BM25).
TermBag augment_query(std::string_view question, const Entity& entity,
                      const TextOptions& opts = {});

class InvertedIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  /// Throws InvalidArgument on an empty corpus, duplicate ids, bad params,
  /// or a corpus with no indexable tokens.
  static InvertedIndex build(std::span<const Passage> passages, Bm25Params params = {},
                             TextOptions text = {});

  /// Top-k hits, score descending, ties by ascending passage id. Terms absent
  /// from the index contribute nothing; no match yields an empty list.
  std::vector<SparseHit> search(const TermBag& query, std::size_t k) const;

  /// Lucene-style BM25 score of one document (by position in id order).
  double score_document(const TermBag& query, std::size_t doc) const;

  TermBag query_terms(std::string_view text) const {
    return make_term_bag(tokenize(text, text_));
  }

  std::size_t doc_count() const { return ids_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  const Bm25Params& params() const { return params_; }
  const TextOptions& text_options() const { return text_; }
  const std::string& doc_id(std::size_t doc) const { return ids_[doc]; }
  std::uint32_t doc_length(std::size_t doc) const { return lengths_[doc]; }
  std::size_t doc_freq(const std::string& term) const;
  std::size_t term_count() const { return postings_.size(); }

  std::string serialize() const;
  static InvertedIndex deserialize(std::string bytes);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };

  /// Reusable per-thread accumulator.
  struct Scratch {
    std::vector<double> acc;
    std::vector<std::uint32_t> touched;
  };
  std::vector<SparseHit> search(const TermBag& query, std::size_t k, Scratch& scratch) const;

 private:
  double idf(std::size_t df) const;
  double term_weight(std::uint32_t tf, std::uint32_t doc_len) const;

  std::vector<std::string> ids_;  // ascending; doc number = position
  std::vector<std::uint32_t> lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_doc_length_ = 0.0;
  Bm25Params params_;
  TextOptions text_;
};

inline std::vector<SparseHit> bm25_search(const InvertedIndex& index, const TermBag& query,
                                          std::size_t k) {
  return index.search(query, k);
}

/// One search per query, parallel over queries (OpenMP). Output order follows
/// input order and each list is identical to the serial result.
std::vector<std::vector<SparseHit>> bm25_search_batch(const InvertedIndex& index,
                                                      std::span<const TermBag> queries,
                                                      std::size_t k);

/// Reference implementation of bm25_search_batch.
std::vector<std::vector<SparseHit>> bm25_search_batch_serial(const InvertedIndex& index,
                                                             std::span<const TermBag> queries,
                                                             std::size_t k);

}  // namespace efr
