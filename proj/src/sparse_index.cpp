#include "efr/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"

namespace efr {

TermBag make_term_bag(std::span<const std::string> tokens) {
  TermBag bag;
  for (const auto& t : tokens) ++bag[t];
  return bag;
}

TermBag augment_query(std::string_view question, const Entity& entity, const TextOptions& opts) {
  auto bag = make_term_bag(tokenize(question, opts));
  for (const auto& t : tokenize(entity.text, opts)) ++bag[t];
  return bag;
}

InvertedIndex InvertedIndex::build(std::span<const Passage> passages, Bm25Params params,
                                   TextOptions text) {
  if (passages.empty()) throw InvalidArgument("cannot index an empty corpus");
  if (!(params.k1 > 0.0)) throw InvalidArgument("BM25 k1 must be positive");
  if (!(params.b >= 0.0 && params.b <= 1.0)) throw InvalidArgument("BM25 b must be in [0, 1]");

  std::vector<std::size_t> order(passages.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return passages[a].id < passages[b].id; });

  InvertedIndex idx;
  idx.params_ = params;
  idx.text_ = text;
  idx.ids_.reserve(passages.size());
  idx.lengths_.reserve(passages.size());
  std::uint64_t total = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& p = passages[order[pos]];
    if (!idx.ids_.empty() && idx.ids_.back() == p.id) {
      throw InvalidArgument("duplicate passage id " + p.id);
    }
    idx.ids_.push_back(p.id);
    const auto toks = tokenize(p.text, text);
    idx.lengths_.push_back(static_cast<std::uint32_t>(toks.size()));
    total += toks.size();
    for (const auto& [term, tf] : make_term_bag(toks)) {
      idx.postings_[term].push_back({static_cast<std::uint32_t>(pos), tf});
    }
  }
  if (total == 0) throw InvalidArgument("corpus has no indexable tokens");
  idx.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(passages.size());
  return idx;
}

std::size_t InvertedIndex::doc_freq(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double InvertedIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(ids_.size());
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double InvertedIndex::term_weight(std::uint32_t tf, std::uint32_t doc_len) const {
  const double f = tf;
  const double norm = 1.0 - params_.b + params_.b * doc_len / avg_doc_length_;
  return f * (params_.k1 + 1.0) / (f + params_.k1 * norm);
}

double InvertedIndex::score_document(const TermBag& query, std::size_t doc) const {
  double s = 0.0;
  for (const auto& [term, qtf] : query) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& plist = it->second;
    auto p = std::lower_bound(plist.begin(), plist.end(), doc,
                              [](const Posting& x, std::size_t d) { return x.doc < d; });
    if (p == plist.end() || p->doc != doc) continue;
    s += qtf * idf(plist.size()) * term_weight(p->tf, lengths_[doc]);
  }
  return s;
}

std::vector<SparseHit> InvertedIndex::search(const TermBag& query, std::size_t k) const {
  Scratch scratch;
  return search(query, k, scratch);
}

std::vector<SparseHit> InvertedIndex::search(const TermBag& query, std::size_t k,
                                             Scratch& scratch) const {
  if (k == 0) throw InvalidArgument("bm25_search: k must be >= 1");
  auto& acc = scratch.acc;
  auto& touched = scratch.touched;
  acc.assign(ids_.size(), 0.0);
  touched.clear();

  // Term-at-a-time in map order, so every document sums its terms in the same order.
  for (const auto& [term, qtf] : query) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = qtf * idf(it->second.size());
    for (const auto& p : it->second) {
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += w * term_weight(p.tf, lengths_[p.doc]);
    }
  }

  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (acc[a] != acc[b]) return acc[a] > acc[b];
    return a < b;  // doc number order is passage id order
  };
  const std::size_t n = std::min(k, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(n),
                    touched.end(), better);

  std::vector<SparseHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hits.push_back({ids_[touched[i]], acc[touched[i]], i + 1});
  }
  return hits;
}

std::string InvertedIndex::serialize() const {
  BinaryWriter w;
  w.magic("EFSI");
  w.u32(kFormatVersion);
  w.f64(params_.k1);
  w.f64(params_.b);
  w.u32((text_.stem ? 1u : 0u) | (text_.stopwords ? 2u : 0u));
  w.u64(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    w.str(ids_[i]);
    w.u32(lengths_[i]);
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [t, _] : postings_) terms.push_back(&t);
  std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
  w.u64(terms.size());
  for (const auto* t : terms) {
    const auto& plist = postings_.at(*t);
    w.str(*t);
    w.u32(static_cast<std::uint32_t>(plist.size()));
    for (const auto& p : plist) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }
  return w.data();
}

InvertedIndex InvertedIndex::deserialize(std::string bytes) {
  BinaryReader r(std::move(bytes), "sparse index");
  r.expect_magic("EFSI");
  r.expect_version(kFormatVersion);
  InvertedIndex idx;
  idx.params_.k1 = r.f64();
  idx.params_.b = r.f64();
  const auto flags = r.u32();
  idx.text_.stem = flags & 1u;
  idx.text_.stopwords = flags & 2u;
  const auto n = r.u64();
  if (n == 0) throw FormatError("sparse index: zero documents");
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    idx.ids_.push_back(r.str());
    idx.lengths_.push_back(r.u32());
    total += idx.lengths_.back();
  }
  const auto nterms = r.u64();
  for (std::uint64_t t = 0; t < nterms; ++t) {
    auto term = r.str();
    const auto np = r.u32();
    std::vector<Posting> plist(np);
    for (auto& p : plist) {
      p.doc = r.u32();
      p.tf = r.u32();
      if (p.doc >= n) throw FormatError("sparse index: posting references unknown document");
    }
    idx.postings_.emplace(std::move(term), std::move(plist));
  }
  if (!r.at_end()) throw FormatError("sparse index: trailing bytes");
  if (total == 0) throw FormatError("sparse index: no tokens");
  idx.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(n);
  return idx;
}

void InvertedIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

std::vector<std::vector<SparseHit>> bm25_search_batch_serial(const InvertedIndex& index,
                                                             std::span<const TermBag> queries,
                                                             std::size_t k) {
  std::vector<std::vector<SparseHit>> out;
  out.reserve(queries.size());
  InvertedIndex::Scratch scratch;
  for (const auto& q : queries) out.push_back(index.search(q, k, scratch));
  return out;
}

std::vector<std::vector<SparseHit>> bm25_search_batch(const InvertedIndex& index,
                                                      std::span<const TermBag> queries,
                                                      std::size_t k) {
  if (k == 0) throw InvalidArgument("bm25_search: k must be >= 1");
  std::vector<std::vector<SparseHit>> out(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel
  {
    InvertedIndex::Scratch scratch;
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = index.search(queries[static_cast<std::size_t>(i)], k, scratch);
    }
  }
  return out;
}

}  // namespace efr
