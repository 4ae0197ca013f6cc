#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "efr/corpus.hpp"

namespace efr {

using EmbeddingVector = std::vector<float>;

/// Sparse hashed feature counts, sorted by bucket, buckets unique.
using FeatureBag = std::vector<std::pair<std::uint32_t, double>>;

/// Reserved token between entity, question and caption in the entity tower
/// input. tokenize() splits on brackets, so no corpus token can equal it.
inline constexpr std::string_view kSeparatorToken = "[sep]";

/// Unigrams and adjacent-pair bigrams. Bucket of a unigram is
/// fnv1a64(token) % hash_dim; of a bigram fnv1a64(left + " " + right) % hash_dim.
FeatureBag featurize_tokens(std::span<const std::string> tokens, std::size_t hash_dim);
FeatureBag featurize(std::string_view text, std::size_t hash_dim);

/// Token streams fed to each tower.
std::vector<std::string> query_tokens(const QueryExample& q);
std::vector<std::string> passage_tokens(const Passage& p);
std::vector<std::string> entity_tokens(const Entity& e, const QueryExample& q);

enum class Tower : std::size_t { query = 0, passage = 1, entity = 2 };

struct EncoderConfig {
  std::size_t hash_dim = 1u << 14;
  std::size_t dim = 64;
  double epsilon = 1e-5;
  double init_scale = 1.0;  // stddev of the shared tower initialization

  bool operator==(const EncoderConfig&) const = default;
};

/// Mean-variance normalization: (z - mean) / sqrt(var + eps).
void layer_norm(std::span<const double> z, double eps, std::span<double> out, double* inv_std = nullptr);
/// Backward of layer_norm given its output and 1/sqrt(var + eps).
void layer_norm_backward(std::span<const double> out, double inv_std, std::span<const double> grad_out,
                         std::span<double> grad_in);

/// Three feature-hashed linear towers (query, passage, entity) with
/// normalization, plus three d x d projection heads used by the
/// query-entity and passage-entity scores. All parameters live in one flat
/// buffer so optimizers and checkpoints treat them uniformly.
///
/// Layout: [W_q, b_q, W_p, b_p, W_e, b_e, A_q, c_q, A_p, c_p, A_e, c_e]
/// with W_t stored feature-major (hash_dim rows of dim) and A_t row-major.
class EncoderModel {
 public:
  /// All parameters zero.
  explicit EncoderModel(EncoderConfig config);

  /// Towers start from one shared Gaussian matrix (as two-tower retrievers
  /// start from one checkpoint), biases zero, heads identity.
  static EncoderModel initialize(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }
  std::size_t hash_dim() const { return config_.hash_dim; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::size_t tower_weight_offset(Tower t) const;
  std::size_t tower_bias_offset(Tower t) const;
  std::size_t head_weight_offset(Tower t) const;
  std::size_t head_bias_offset(Tower t) const;

  /// Normalized tower output f_t for a feature bag.
  std::vector<double> tower(Tower t, const FeatureBag& features) const;
  /// Pre-normalization tower activation W_t x + b_t.
  std::vector<double> tower_preactivation(Tower t, const FeatureBag& features) const;
  /// Normalized projection proj_t(f).
  std::vector<double> head(Tower t, std::span<const double> f) const;
  std::vector<double> head_preactivation(Tower t, std::span<const double> f) const;

  bool operator==(const EncoderModel&) const = default;

 private:
  EncoderConfig config_;
  std::vector<double> params_;
};

EmbeddingVector encode_query(const EncoderModel& model, const QueryExample& q);
EmbeddingVector encode_passage(const EncoderModel& model, const Passage& p);
EmbeddingVector encode_entity(const EncoderModel& model, const Entity& e, const QueryExample& q);

/// Passage embeddings for a whole corpus, parallel over passages.
std::vector<EmbeddingVector> encode_passages(const EncoderModel& model,
                                             std::span<const Passage> passages);

/// Key under which an entity embedding is stored in an embedding file.
std::string entity_embedding_key(const std::string& query_id, const Entity& e);

using EmbeddingMap = std::map<std::string, EmbeddingVector>;

/// "EFEM" file: version, dim, count, then (id, dim floats) rows in id order.
/// Every row must have the same dimension; an empty map needs `dim_hint`.
void write_embeddings(const EmbeddingMap& rows, const std::filesystem::path& path,
                      std::uint32_t dim_hint = 0);
std::string serialize_embeddings(const EmbeddingMap& rows, std::uint32_t dim_hint = 0);
EmbeddingMap read_embeddings(const std::filesystem::path& path);
EmbeddingMap deserialize_embeddings(std::string bytes);

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

}  // namespace efr
