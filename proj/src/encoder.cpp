#include "efr/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"
#include "efr/rng.hpp"
#include "efr/text.hpp"

namespace efr {

FeatureBag featurize_tokens(std::span<const std::string> tokens, std::size_t hash_dim) {
  if (hash_dim < 2) throw InvalidArgument("featurize: hash_dim must be >= 2");
  std::vector<std::uint32_t> buckets;
  buckets.reserve(tokens.size() * 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    buckets.push_back(static_cast<std::uint32_t>(fnv1a(tokens[i]) % hash_dim));
    if (i + 1 < tokens.size()) {
      std::string bigram = tokens[i];
      bigram.push_back(' ');
      bigram += tokens[i + 1];
      buckets.push_back(static_cast<std::uint32_t>(fnv1a(bigram) % hash_dim));
    }
  }
  std::sort(buckets.begin(), buckets.end());
  FeatureBag bag;
  for (auto b : buckets) {
    if (!bag.empty() && bag.back().first == b) {
      bag.back().second += 1.0;
    } else {
      bag.emplace_back(b, 1.0);
    }
  }
  return bag;
}

FeatureBag featurize(std::string_view text, std::size_t hash_dim) {
  return featurize_tokens(tokenize(text), hash_dim);
}

std::vector<std::string> query_tokens(const QueryExample& q) {
  auto toks = tokenize(q.question);
  for (auto& t : tokenize(q.caption)) toks.push_back(std::move(t));
  for (const auto& e : q.entities) {
    if (e.source == EntitySource::tag || e.source == EntitySource::wikidata) {
      for (auto& t : tokenize(e.text)) toks.push_back(std::move(t));
    }
  }
  return toks;
}

std::vector<std::string> passage_tokens(const Passage& p) { return tokenize(p.text); }

std::vector<std::string> entity_tokens(const Entity& e, const QueryExample& q) {
  auto toks = tokenize(e.text);
  toks.emplace_back(kSeparatorToken);
  for (auto& t : tokenize(q.question)) toks.push_back(std::move(t));
  toks.emplace_back(kSeparatorToken);
  for (auto& t : tokenize(q.caption)) toks.push_back(std::move(t));
  return toks;
}

void layer_norm(std::span<const double> z, double eps, std::span<double> out, double* inv_std) {
  const double n = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= n;
  const double r = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - mean) * r;
  if (inv_std) *inv_std = r;
}

void layer_norm_backward(std::span<const double> out, double inv_std, std::span<const double> grad_out,
                         std::span<double> grad_in) {
  const double n = static_cast<double>(out.size());
  double mean_g = 0.0;
  double mean_gf = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    mean_g += grad_out[i];
    mean_gf += grad_out[i] * out[i];
  }
  mean_g /= n;
  mean_gf /= n;
  for (std::size_t i = 0; i < out.size(); ++i) {
    grad_in[i] = inv_std * (grad_out[i] - mean_g - out[i] * mean_gf);
  }
}

EncoderModel::EncoderModel(EncoderConfig config) : config_(config) {
  if (config_.hash_dim < 2) throw InvalidArgument("encoder: hash_dim must be >= 2");
  if (config_.dim < 2) throw InvalidArgument("encoder: dim must be >= 2");
  if (!(config_.epsilon > 0.0)) throw InvalidArgument("encoder: epsilon must be positive");
  const std::size_t d = config_.dim;
  params_.assign(3 * (config_.hash_dim * d + d) + 3 * (d * d + d), 0.0);
}

std::size_t EncoderModel::tower_weight_offset(Tower t) const {
  const std::size_t d = config_.dim;
  return static_cast<std::size_t>(t) * (config_.hash_dim * d + d);
}

std::size_t EncoderModel::tower_bias_offset(Tower t) const {
  return tower_weight_offset(t) + config_.hash_dim * config_.dim;
}

std::size_t EncoderModel::head_weight_offset(Tower t) const {
  const std::size_t d = config_.dim;
  return 3 * (config_.hash_dim * d + d) + static_cast<std::size_t>(t) * (d * d + d);
}

std::size_t EncoderModel::head_bias_offset(Tower t) const {
  return head_weight_offset(t) + config_.dim * config_.dim;
}

EncoderModel EncoderModel::initialize(EncoderConfig config, std::uint64_t seed) {
  EncoderModel m(config);
  const std::size_t d = config.dim;
  const std::size_t n = config.hash_dim * d;
  Rng rng(seed);
  auto w = m.params_.begin();
  const auto wq = w + static_cast<std::ptrdiff_t>(m.tower_weight_offset(Tower::query));
  for (std::size_t i = 0; i < n; ++i) wq[static_cast<std::ptrdiff_t>(i)] = config.init_scale * rng.normal();
  for (Tower t : {Tower::passage, Tower::entity}) {
    std::copy_n(wq, n, w + static_cast<std::ptrdiff_t>(m.tower_weight_offset(t)));
  }
  for (Tower t : {Tower::query, Tower::passage, Tower::entity}) {
    auto a = w + static_cast<std::ptrdiff_t>(m.head_weight_offset(t));
    for (std::size_t i = 0; i < d; ++i) a[static_cast<std::ptrdiff_t>(i * d + i)] = 1.0;
  }
  return m;
}

std::vector<double> EncoderModel::tower_preactivation(Tower t, const FeatureBag& features) const {
  const std::size_t d = config_.dim;
  const double* b = params_.data() + tower_bias_offset(t);
  const double* w = params_.data() + tower_weight_offset(t);
  std::vector<double> z(b, b + d);
  for (const auto& [idx, count] : features) {
    if (idx >= config_.hash_dim) throw InvalidArgument("feature index out of range");
    const double* row = w + static_cast<std::size_t>(idx) * d;
    for (std::size_t i = 0; i < d; ++i) z[i] += count * row[i];
  }
  return z;
}

std::vector<double> EncoderModel::tower(Tower t, const FeatureBag& features) const {
  auto z = tower_preactivation(t, features);
  std::vector<double> f(z.size());
  layer_norm(z, config_.epsilon, f);
  return f;
}

std::vector<double> EncoderModel::head_preactivation(Tower t, std::span<const double> f) const {
  const std::size_t d = config_.dim;
  if (f.size() != d) {
    throw InvalidArgument("dimension mismatch: got " + std::to_string(f.size()) + ", model has " +
                          std::to_string(d));
  }
  const double* a = params_.data() + head_weight_offset(t);
  const double* c = params_.data() + head_bias_offset(t);
  std::vector<double> y(c, c + d);
  for (std::size_t i = 0; i < d; ++i) {
    const double* row = a + i * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += row[j] * f[j];
    y[i] += s;
  }
  return y;
}

std::vector<double> EncoderModel::head(Tower t, std::span<const double> f) const {
  auto y = head_preactivation(t, f);
  std::vector<double> g(y.size());
  layer_norm(y, config_.epsilon, g);
  return g;
}

namespace {

EmbeddingVector to_float(const std::vector<double>& v) {
  return EmbeddingVector(v.begin(), v.end());
}

}  // namespace

EmbeddingVector encode_query(const EncoderModel& model, const QueryExample& q) {
  return to_float(model.tower(Tower::query, featurize_tokens(query_tokens(q), model.hash_dim())));
}

EmbeddingVector encode_passage(const EncoderModel& model, const Passage& p) {
  return to_float(model.tower(Tower::passage, featurize_tokens(passage_tokens(p), model.hash_dim())));
}

EmbeddingVector encode_entity(const EncoderModel& model, const Entity& e, const QueryExample& q) {
  return to_float(model.tower(Tower::entity, featurize_tokens(entity_tokens(e, q), model.hash_dim())));
}

std::vector<EmbeddingVector> encode_passages(const EncoderModel& model,
                                             std::span<const Passage> passages) {
  std::vector<EmbeddingVector> out(passages.size());
  const auto n = static_cast<std::ptrdiff_t>(passages.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = encode_passage(model, passages[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::string entity_embedding_key(const std::string& query_id, const Entity& e) {
  return query_id + "::" + std::string(to_string(e.source)) + "::" + e.text;
}

std::string serialize_embeddings(const EmbeddingMap& rows, std::uint32_t dim_hint) {
  std::uint32_t dim = dim_hint;
  if (!rows.empty()) dim = static_cast<std::uint32_t>(rows.begin()->second.size());
  BinaryWriter w;
  w.magic("EFEM");
  w.u32(kEmbeddingFormatVersion);
  w.u32(dim);
  w.u64(rows.size());
  for (const auto& [id, v] : rows) {
    if (v.size() != dim) {
      throw InvalidArgument("embedding \"" + id + "\" has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(dim));
    }
    w.str(id);
    for (float x : v) w.f32(x);
  }
  return w.data();
}

void write_embeddings(const EmbeddingMap& rows, const std::filesystem::path& path,
                      std::uint32_t dim_hint) {
  write_file(path, serialize_embeddings(rows, dim_hint));
}

EmbeddingMap deserialize_embeddings(std::string bytes) {
  BinaryReader r(std::move(bytes), "embedding file");
  r.expect_magic("EFEM");
  r.expect_version(kEmbeddingFormatVersion);
  const auto dim = r.u32();
  const auto count = r.u64();
  EmbeddingMap out;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto id = r.str();
    if (r.remaining() < std::size_t{dim} * 4) {
      throw FormatError("embedding file: truncated row for id \"" + id + "\"");
    }
    EmbeddingVector v(dim);
    for (auto& x : v) x = r.f32();
    if (!out.emplace(id, std::move(v)).second) {
      throw FormatError("embedding file: duplicate id \"" + id + "\"");
    }
  }
  if (!r.at_end()) throw FormatError("embedding file: trailing bytes after " + std::to_string(count) + " rows");
  return out;
}

EmbeddingMap read_embeddings(const std::filesystem::path& path) {
  return deserialize_embeddings(read_file(path));
}

}  // namespace efr
