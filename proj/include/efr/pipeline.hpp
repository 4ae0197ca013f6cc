#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "efr/encoder.hpp"
#include "efr/oracle_miner.hpp"
#include "efr/scorer.hpp"
#include "efr/sparse_index.hpp"
#include "efr/synth.hpp"
#include "efr/trainer.hpp"

namespace efr {

/// Flat key=value configuration. Lines starting with '#' are comments.
/// Unknown keys are rejected so typos surface as ConfigError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  /// Parses "key=value".
  void assign(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;

  /// Artifact path: the key's value, or a default file under output_dir.
  std::filesystem::path path(const std::string& key) const;
  /// Input path that must exist; throws ConfigError naming it otherwise.
  std::filesystem::path input(const std::string& key) const;

  /// Sorted "key=value" lines of every setting that affects outputs.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
  std::uint64_t seed() const { return u64("seed"); }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

TextOptions text_options(const RunConfig& c);
Bm25Params bm25_params(const RunConfig& c);
MinerConfig miner_config(const RunConfig& c);
EncoderConfig encoder_config(const RunConfig& c);
TrainConfig train_config(const RunConfig& c);

struct RetrievalOptions {
  std::size_t depth = 80;
  double lambda = 1.0;
};

using RankedQuery = std::pair<std::string, std::vector<RerankedHit>>;

/// MIPS top-depth then rerank, one entry per query in input order. Query
/// and entity vectors come from the optional embedding maps when given,
/// otherwise from the model.
std::vector<RankedQuery> retrieve(const EncoderModel& model, const DenseIndex& passages,
                                  std::span<const QueryExample> queries,
                                  const RetrievalOptions& options,
                                  const EmbeddingMap* query_embeddings = nullptr,
                                  const EmbeddingMap* entity_embeddings = nullptr);

std::vector<QueryRun> to_query_runs(std::span<const RankedQuery> ranked);

DenseIndex build_dense_index(const EncoderModel& model, std::span<const Passage> passages);

/// Oracle entity texts per query from mined entity scores.
std::map<std::string, std::vector<std::string>> oracle_entities(
    std::span<const std::pair<std::string, std::vector<EntityScore>>> scores);

/// Writes corpus.jsonl, train_queries.jsonl, test_queries.jsonl and
/// efr.conf into `dir`.
void write_synthetic(const SynthDataset& data, const std::filesystem::path& dir,
                     const std::string& config_text);

/// Subcommands. Each returns normally on success and throws efr::Error
/// (ConfigError for usage problems) otherwise.
void cmd_index(const RunConfig& c, std::ostream& out);
void cmd_mine(const RunConfig& c, std::ostream& out);
void cmd_train(const RunConfig& c, std::ostream& out);
void cmd_retrieve(const RunConfig& c, std::ostream& out);
void cmd_eval(const RunConfig& c, std::ostream& out);
void cmd_sweep_lambda(const RunConfig& c, std::ostream& out);
void cmd_gen_synth(const RunConfig& c, std::ostream& out);

}  // namespace efr
