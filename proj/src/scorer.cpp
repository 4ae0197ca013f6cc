#include "efr/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#ifdef EFR_HAS_OPENMP
#include <omp.h>
#endif

#include "efr/binary_io.hpp"
#include "efr/error.hpp"

namespace efr {

double score_qp(std::span<const float> f_q, std::span<const float> f_p) {
  if (f_q.size() != f_p.size()) {
    throw InvalidArgument("score_qp: dimension mismatch (" + std::to_string(f_q.size()) + " vs " +
                          std::to_string(f_p.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f_q.size(); ++i) s += static_cast<double>(f_q[i]) * f_p[i];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

}  // namespace

double score_qe(const EncoderModel& model, std::span<const float> f_q, std::span<const float> f_e) {
  return dot(model.head(Tower::query, widen(f_q)), model.head(Tower::entity, widen(f_e)));
}

double score_pe(const EncoderModel& model, std::span<const float> f_p, std::span<const float> f_e) {
  return dot(model.head(Tower::passage, widen(f_p)), model.head(Tower::entity, widen(f_e)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace

// Weights are formed in the log domain and max-shifted, so a set of very
// negative s_qe still yields a proper convex combination.
std::vector<double> entity_weights(std::span<const double> s_qe) {
  std::vector<double> w(s_qe.size());
  if (w.empty()) return w;
  double top = -INFINITY;
  for (std::size_t i = 0; i < s_qe.size(); ++i) top = std::max(top, w[i] = log_sigmoid(s_qe[i]));
  double total = 0.0;
  for (auto& x : w) total += (x = std::exp(x - top));
  for (auto& x : w) x /= total;
  return w;
}

double score_qpe(std::span<const double> s_qe, std::span<const double> s_pe) {
  if (s_qe.size() != s_pe.size()) throw InvalidArgument("score_qpe: list lengths differ");
  if (s_qe.empty()) return 0.0;
  const auto w = entity_weights(s_qe);
  double out = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) out += w[i] * s_pe[i];
  return out;
}

DenseIndex::DenseIndex(std::vector<std::string> ids, std::span<const EmbeddingVector> rows)
    : ids_(std::move(ids)) {
  if (ids_.size() != rows.size()) throw InvalidArgument("DenseIndex: id/row count mismatch");
  dim_ = rows.empty() ? 0 : rows.front().size();
  data_.reserve(rows.size() * dim_);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim_) throw InvalidArgument("DenseIndex: ragged row for " + ids_[r]);
    for (float x : rows[r]) {
      if (!std::isfinite(x)) throw InvalidArgument("DenseIndex: non-finite value in " + ids_[r]);
      data_.push_back(x);
    }
  }
  by_id_.resize(ids_.size());
  std::iota(by_id_.begin(), by_id_.end(), 0);
  std::sort(by_id_.begin(), by_id_.end(), [&](auto a, auto b) { return ids_[a] < ids_[b]; });
  for (std::size_t i = 1; i < by_id_.size(); ++i) {
    if (ids_[by_id_[i]] == ids_[by_id_[i - 1]]) {
      throw InvalidArgument("DenseIndex: duplicate id " + ids_[by_id_[i]]);
    }
  }
}

DenseIndex DenseIndex::from_map(const EmbeddingMap& rows) {
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vecs;
  for (const auto& [id, v] : rows) {
    ids.push_back(id);
    vecs.push_back(v);
  }
  return DenseIndex(std::move(ids), vecs);
}

EmbeddingMap DenseIndex::to_map() const {
  EmbeddingMap out;
  for (std::size_t r = 0; r < size(); ++r) {
    auto v = row(r);
    out.emplace(ids_[r], EmbeddingVector(v.begin(), v.end()));
  }
  return out;
}

std::size_t DenseIndex::row_of(const std::string& id) const {
  auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id,
                             [&](std::size_t r, const std::string& key) { return ids_[r] < key; });
  if (it == by_id_.end() || ids_[*it] != id) throw InvalidArgument("DenseIndex: unknown id " + id);
  return *it;
}

namespace {

struct ScoredRow {
  double score;
  std::size_t row;
};

// Scan rows [begin, end) keeping the k best in a heap whose top is the worst.
std::vector<ScoredRow> scan_topk(const DenseIndex& index, std::span<const float> f_q, std::size_t k,
                                 std::size_t begin, std::size_t end) {
  auto better = [&](const ScoredRow& a, const ScoredRow& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.id(a.row) < index.id(b.row);
  };
  std::vector<ScoredRow> heap;
  heap.reserve(std::min(k, end - begin) + 1);
  for (std::size_t r = begin; r < end; ++r) {
    ScoredRow cand{score_qp(f_q, index.row(r)), r};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), better);
  return heap;
}

std::vector<Candidate> to_candidates(const DenseIndex& index, const std::vector<ScoredRow>& rows) {
  std::vector<Candidate> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({index.id(r.row), r.score});
  return out;
}

void check_query(const DenseIndex& index, std::span<const float> f_q, std::size_t k) {
  if (index.empty()) throw InvalidArgument("mips_topk: empty index");
  if (k == 0) throw InvalidArgument("mips_topk: k must be >= 1");
  if (f_q.size() != index.dim()) throw InvalidArgument("mips_topk: dimension mismatch");
}

}  // namespace

std::vector<Candidate> mips_topk_serial(const DenseIndex& index, std::span<const float> f_q,
                                        std::size_t k) {
  check_query(index, f_q, k);
  return to_candidates(index, scan_topk(index, f_q, k, 0, index.size()));
}

std::vector<Candidate> mips_topk(const DenseIndex& index, std::span<const float> f_q, std::size_t k) {
  check_query(index, f_q, k);
  const std::size_t n = index.size();
#ifdef EFR_HAS_OPENMP
  const auto threads = static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
#else
  const std::size_t threads = 1;
#endif
  if (threads == 1 || n < 1024) return to_candidates(index, scan_topk(index, f_q, k, 0, n));

  std::vector<std::vector<ScoredRow>> partial(threads);
  const auto chunks = static_cast<std::ptrdiff_t>(threads);
#pragma omp parallel for schedule(static, 1)
  for (std::ptrdiff_t t = 0; t < chunks; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const std::size_t begin = n * u / threads;
    const std::size_t end = n * (u + 1) / threads;
    partial[u] = scan_topk(index, f_q, k, begin, end);
  }
  std::vector<ScoredRow> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  auto better = [&](const ScoredRow& a, const ScoredRow& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.id(a.row) < index.id(b.row);
  };
  const std::size_t m = std::min(k, merged.size());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(m), merged.end(), better);
  merged.resize(m);
  return to_candidates(index, merged);
}

std::vector<RerankedHit> rerank(std::span<const Candidate> candidates, const EncoderModel& model,
                                const DenseIndex& passages, std::span<const float> f_q,
                                std::span<const EntityInput> entities, double lambda) {
  if (candidates.empty()) throw InvalidArgument("rerank: no candidates");
  if (lambda < 0.0) throw InvalidArgument("rerank: lambda must be >= 0");

  std::vector<double> s_qe;
  std::vector<std::vector<double>> g_e;
  s_qe.reserve(entities.size());
  if (!entities.empty()) {
    const auto g_q = model.head(Tower::query, widen(f_q));
    for (const auto& e : entities) {
      g_e.push_back(model.head(Tower::entity, widen(e.f_e)));
      s_qe.push_back(dot(g_q, g_e.back()));
    }
  }

  std::vector<RerankedHit> out;
  out.reserve(candidates.size());
  std::vector<double> s_pe(entities.size());
  for (const auto& c : candidates) {
    RerankedHit hit;
    hit.id = c.id;
    auto& bd = hit.breakdown;
    bd.s_qp = c.s_qp;
    if (!entities.empty()) {
      const auto g_p = model.head(Tower::passage, widen(passages.row(passages.row_of(c.id))));
      for (std::size_t e = 0; e < entities.size(); ++e) {
        s_pe[e] = dot(g_p, g_e[e]);
        bd.per_entity.push_back({entities[e].text, s_qe[e], sigmoid(s_qe[e]), s_pe[e]});
      }
    }
    bd.s_qpe = score_qpe(s_qe, s_pe);
    bd.combined = combined_score(bd.s_qp, bd.s_qpe, lambda);
    out.push_back(std::move(hit));
  }
  std::stable_sort(out.begin(), out.end(), [](const RerankedHit& a, const RerankedHit& b) {
    if (a.breakdown.combined != b.breakdown.combined) return a.breakdown.combined > b.breakdown.combined;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

std::string format_trec_run(std::span<const QueryRun> runs, const std::string& tag) {
  std::string buf;
  char score[64];
  for (const auto& q : runs) {
    for (const auto& e : q.entries) {
      std::snprintf(score, sizeof score, "%.9g", e.score);
      buf += q.query_id + " Q0 " + e.passage_id + " " + std::to_string(e.rank) + " " + score + " " +
             tag + "\n";
    }
  }
  return buf;
}

void write_trec_run(const std::filesystem::path& path, std::span<const QueryRun> runs,
                    const std::string& tag) {
  write_file(path, format_trec_run(runs, tag));
}

std::vector<QueryRun> read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<QueryRun> out;
  std::map<std::string, std::size_t> pos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string qid, q0, pid, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(ls >> qid >> q0 >> pid >> rank >> score >> tag)) {
      throw FormatError(path.string() + ": malformed run line " + std::to_string(lineno));
    }
    auto [it, fresh] = pos.emplace(qid, out.size());
    if (fresh) out.push_back({qid, {}});
    out[it->second].entries.push_back({pid, rank, score});
  }
  for (auto& q : out) {
    std::stable_sort(q.entries.begin(), q.entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
  }
  return out;
}

void write_breakdown_sidecar(const std::filesystem::path& path,
                             std::span<const std::pair<std::string, std::vector<RerankedHit>>> runs,
                             double lambda) {
  using ojson = nlohmann::ordered_json;
  std::string buf;
  for (const auto& [qid, hits] : runs) {
    for (const auto& h : hits) {
      ojson j;
      j["query_id"] = qid;
      j["passage_id"] = h.id;
      j["rank"] = h.rank;
      j["lambda"] = lambda;
      j["s_qp"] = h.breakdown.s_qp;
      j["s_qpe"] = h.breakdown.s_qpe;
      j["combined"] = h.breakdown.combined;
      j["per_entity"] = ojson::array();
      for (const auto& e : h.breakdown.per_entity) {
        j["per_entity"].push_back(
            {{"text", e.text}, {"s_qe", e.s_qe}, {"sigmoid_s_qe", e.importance}, {"s_pe", e.s_pe}});
      }
      buf += j.dump() + '\n';
    }
  }
  write_file(path, buf);
}

}  // namespace efr
