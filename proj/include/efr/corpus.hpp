#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace efr {

enum class EntitySource { question, sub_question, candidate, tag, wikidata, caption };

inline constexpr std::array<EntitySource, 6> kAllSources{
    EntitySource::question, EntitySource::sub_question, EntitySource::candidate,
    EntitySource::tag,      EntitySource::wikidata,     EntitySource::caption};

std::string_view to_string(EntitySource s);
/// Throws InvalidArgument for names outside the six-value set.
EntitySource parse_entity_source(std::string_view name);

struct Entity {
  std::string text;
  EntitySource source = EntitySource::question;
  std::optional<bool> oracle_label;

  bool operator==(const Entity&) const = default;
};

struct Passage {
  std::string id;
  std::string text;
  std::size_t token_count = 0;
};

/// Validates id/text and fills token_count.
Passage make_passage(std::string id, std::string text);

struct QueryExample {
  std::string id;
  std::string question;
  std::string caption;
  std::vector<std::string> answers;
  std::vector<Entity> entities;
};

/// Throws InvalidArgument if any QueryExample invariant is broken.
void validate(const QueryExample& q);

/// True iff the normalized passage contains some normalized answer as a
/// contiguous token run. Throws InvalidArgument when every answer
/// normalizes to the empty string (no gold definition).
bool contains_answer(const Passage& passage, std::span<const std::string> answers,
                     bool stem = false);

/// Precomputed normalized answer (or entity) token runs for repeated tests.
class PhraseMatcher {
 public:
  PhraseMatcher() = default;
  PhraseMatcher(std::span<const std::string> phrases, bool stem);

  /// Answer-set semantics: throws if every phrase normalizes to empty.
  static PhraseMatcher for_answers(std::span<const std::string> answers, bool stem);

  bool matches(const std::vector<std::string>& normalized_passage) const;
  bool empty() const { return runs_.empty(); }

 private:
  std::vector<std::vector<std::string>> runs_;
};

/// Immutable passage collection with id lookup and cached normalized tokens.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Passage> passages, bool stem = false);

  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  const Passage& operator[](std::size_t i) const { return passages_[i]; }
  const std::vector<Passage>& passages() const { return passages_; }
  bool stem() const { return stem_; }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws InvalidArgument for unknown ids.
  std::size_t index_of(std::string_view id) const;
  const std::vector<std::string>& normalized(std::size_t i) const { return normalized_[i]; }

 private:
  std::vector<Passage> passages_;
  std::vector<std::vector<std::string>> normalized_;
  std::unordered_map<std::string, std::size_t> by_id_;
  bool stem_ = false;
};

std::vector<Passage> load_corpus(const std::filesystem::path& path);
std::vector<QueryExample> load_queries(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, std::span<const Passage> passages);
void save_queries(const std::filesystem::path& path, std::span<const QueryExample> queries);

/// One JSON-lines record, without the trailing newline.
std::string to_json_line(const Passage& p);
std::string to_json_line(const QueryExample& q);

}  // namespace efr
