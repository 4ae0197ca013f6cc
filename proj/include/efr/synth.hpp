#pragma once

#include <cstdint>
#include <vector>

#include "efr/corpus.hpp"

namespace efr {

/// Shape of the generated world. Every entity ("<name> <category>") has one
/// value per relation; fact passages state it, distractor passages state a
/// category/relation/value triple without any entity, and filler passages
/// pad the corpus. A query asks for one relation of a hidden subject entity:
/// the caption reveals the category, the question only the relation, and
/// the subject itself appears among noisy entity candidates.
struct SynthConfig {
  std::uint64_t seed = 2024;
  std::size_t categories = 10;
  std::size_t entities_per_category = 30;
  std::size_t relations = 4;
  std::size_t values_per_relation = 16;
  std::size_t generic_passages_per_entity = 1;
  std::size_t distractors_per_category_relation = 4;
  std::size_t total_passages = 2400;
  std::size_t filler_vocabulary = 240;
  std::size_t train_queries = 400;
  std::size_t test_queries = 200;
  double subject_in_tags = 0.3;
  double subject_in_sub_question = 0.5;
  double answer_in_candidates = 0.25;
};

struct SynthDataset {
  std::vector<Passage> passages;
  std::vector<QueryExample> train_queries;
  std::vector<QueryExample> test_queries;
};

/// Deterministic in `config` (including the seed).
SynthDataset generate_synthetic(const SynthConfig& config);

}  // namespace efr
