#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "efr/corpus.hpp"
#include "efr/encoder.hpp"
#include "efr/oracle_miner.hpp"

namespace efr {

enum class OptimizerKind { momentless, adaptive };

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 8;
  std::size_t batch_size = 6;
  double warmup_fraction = 0.1;
  double w_qp = 1.0;
  double w_qpe = 1.0;
  double w_ent = 1.0;
  std::uint64_t seed = 42;
  double lambda = 1.0;  // recorded with the checkpoint; used at inference
  OptimizerKind optimizer = OptimizerKind::momentless;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t eval_every = 0;  // steps between evaluation hooks; 0 = never

  /// Throws InvalidArgument if an invariant is broken.
  void validate() const;
};

/// -log softmax of the positive among {positive} + negatives (max-shifted).
double contrastive_loss(double positive, std::span<const double> negatives);

/// Mean of softplus(s) - y*s over entities; 0 for an empty list.
double entity_bce(std::span<const double> s_qe, const std::vector<bool>& labels);

/// Training instances resolved against a corpus, with feature bags cached.
class TrainingData {
 public:
  struct EntitySet {
    std::vector<FeatureBag> features;
    std::vector<bool> labels;
  };
  struct Example {
    std::size_t query = 0;     // into queries()
    std::size_t positive = 0;  // into the passage bag table
    std::size_t negative = 0;
    std::shared_ptr<const EntitySet> entities;
  };

  /// Throws InvalidArgument for instances naming unknown query or passage ids.
  TrainingData(const Corpus& corpus, std::span<const QueryExample> queries,
               std::span<const TrainingInstance> instances, std::size_t hash_dim);

  std::size_t size() const { return examples_.size(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const FeatureBag& query_features(std::size_t q) const { return query_features_[q]; }
  const FeatureBag& passage_features(std::size_t p) const { return passage_features_[p]; }

 private:
  std::vector<Example> examples_;
  std::vector<FeatureBag> query_features_;
  std::vector<FeatureBag> passage_features_;
};

struct LossComponents {
  double l_qp = 0.0;
  double l_qpe = 0.0;
  double l_ent = 0.0;
  double total = 0.0;
  std::size_t candidates_per_query = 0;  // positive + in-batch + paired negatives
};

/// Gradient buffer laid out like EncoderModel::params(), with the tower
/// rows written by the last backward pass recorded for sparse updates.
class Gradient {
 public:
  explicit Gradient(const EncoderModel& model);

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  void add_tower_row(Tower t, std::uint32_t feature, double scale, std::span<const double> g);
  /// (tower, feature) rows touched since the last clear().
  const std::vector<std::pair<Tower, std::uint32_t>>& touched_rows() const { return touched_; }
  /// Zeroes touched rows and every dense (bias / head) block.
  void clear();

 private:
  std::size_t hash_dim_;
  std::size_t dim_;
  std::size_t dense_begin_;
  std::vector<double> values_;
  std::vector<char> marked_;
  std::vector<std::pair<Tower, std::uint32_t>> touched_;
  std::size_t weight_offset_[3] = {};
  std::size_t bias_offset_[3] = {};
};

/// R-Neg+IB-All loss for one batch (indices into `data`). Every query is
/// scored against all 2B passages of the batch: its positive, its paired
/// negative, and the 2B-2 other in-batch passages. The contrastive loss is
/// applied to S_qp and to S_qpe over the same candidates, plus entity BCE
/// on S_qe. Gradients are accumulated into `grad` when it is non-null.
LossComponents batch_loss(const EncoderModel& model, const TrainingData& data,
                          std::span<const std::size_t> batch, const TrainConfig& config,
                          Gradient* grad = nullptr);

struct LossRecord {
  std::size_t step = 0;
  double l_qp = 0.0;
  double l_qpe = 0.0;
  double l_ent = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

using EvalHook = std::function<void(std::size_t step, const EncoderModel& snapshot)>;

/// Learning rate at 0-based `step`: linear warmup then constant.
double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps);

/// Trains `model` in place. Throws Error on a non-finite loss.
std::vector<LossRecord> train(EncoderModel& model, const TrainingData& data, const TrainConfig& config,
                              const EvalHook& hook = {});

struct GradCheckOptions {
  double step = 1e-4;
  std::size_t samples = 256;  // coordinates; all of them if >= param count
  std::uint64_t seed = 7;
  double floor = 1e-6;  // denominators below this are clamped
  std::vector<std::size_t> coordinates;  // explicit list overrides sampling
  std::function<void(std::span<double>)> tamper;  // applied to the analytic gradient
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Central finite differences of batch_loss against the analytic gradient;
/// error per coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckReport gradient_check(const EncoderModel& model, const TrainingData& data,
                               std::span<const std::size_t> batch, const TrainConfig& config,
                               const GradCheckOptions& options = {});

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// "EFCK" checkpoint: version, config echo, encoder shape, flat parameters.
void save_checkpoint(const std::filesystem::path& path, const EncoderModel& model,
                     const std::string& config_echo);
std::string serialize_checkpoint(const EncoderModel& model, const std::string& config_echo);
struct Checkpoint {
  EncoderModel model;
  std::string config_echo;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// "step,L_qp,L_qpe,L_ent,lr" rows.
void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history);

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

}  // namespace efr
