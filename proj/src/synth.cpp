#include "efr/synth.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string>

#include "efr/error.hpp"
#include "efr/rng.hpp"

namespace efr {
namespace {

constexpr std::array<const char*, 12> kCategoryWords{
    "vegetable", "animal", "vehicle", "instrument", "fruit",  "tool",
    "bird",      "furniture", "fabric", "mineral",  "flower", "insect"};
constexpr std::array<const char*, 6> kRelationWords{"color", "origin", "habitat", "texture", "season",
                                                    "shape"};

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {
    for (const char* w : kCategoryWords) used_.insert(w);
    for (const char* w : kRelationWords) used_.insert(w);
  }

  std::string make(std::size_t syllables) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(consonants[rng_.index(consonants.size())]);
        w.push_back(vowels[rng_.index(vowels.size())]);
      }
      w.push_back(consonants[rng_.index(consonants.size())]);
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct World {
  std::vector<std::string> categories;
  std::vector<std::string> relations;
  std::vector<std::vector<std::string>> values;  // [relation][v]
  std::vector<std::string> fillers;
  struct Ent {
    std::string name;
    std::size_t category;
    std::vector<std::size_t> value;  // per relation
    std::string text() const;
    const World* world;
  };
  std::vector<Ent> entities;
};

std::string World::Ent::text() const { return name + " " + world->categories[category]; }

std::string filler_run(Rng& rng, const World& w, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += w.fillers[rng.index(w.fillers.size())];
  }
  return out;
}

}  // namespace

SynthDataset generate_synthetic(const SynthConfig& c) {
  if (c.categories == 0 || c.categories > kCategoryWords.size()) {
    throw InvalidArgument("synth: categories must be in [1, 12]");
  }
  if (c.relations == 0 || c.relations > kRelationWords.size()) {
    throw InvalidArgument("synth: relations must be in [1, 6]");
  }
  if (c.entities_per_category < 3 || c.values_per_relation < 2 || c.filler_vocabulary < 10) {
    throw InvalidArgument("synth: world too small");
  }

  Rng rng(c.seed);
  WordMaker words(rng);
  World w;
  for (std::size_t i = 0; i < c.categories; ++i) w.categories.emplace_back(kCategoryWords[i]);
  for (std::size_t r = 0; r < c.relations; ++r) {
    w.relations.emplace_back(kRelationWords[r]);
    w.values.emplace_back();
    for (std::size_t v = 0; v < c.values_per_relation; ++v) w.values.back().push_back(words.make(2));
  }
  for (std::size_t i = 0; i < c.filler_vocabulary; ++i) w.fillers.push_back(words.make(1 + i % 2));
  for (std::size_t cat = 0; cat < c.categories; ++cat) {
    for (std::size_t i = 0; i < c.entities_per_category; ++i) {
      World::Ent e{words.make(2), cat, {}, &w};
      for (std::size_t r = 0; r < c.relations; ++r) e.value.push_back(rng.index(c.values_per_relation));
      w.entities.push_back(std::move(e));
    }
  }

  SynthDataset out;
  std::size_t next_id = 0;
  auto add = [&](std::string text) {
    char id[32];
    std::snprintf(id, sizeof id, "p%05zu", next_id++);
    out.passages.push_back(make_passage(id, std::move(text)));
  };

  for (const auto& e : w.entities) {
    for (std::size_t r = 0; r < c.relations; ++r) {
      const auto& rel = w.relations[r];
      const auto& val = w.values[r][e.value[r]];
      switch (rng.index(3)) {
        case 0:
          add(filler_run(rng, w, 3) + " the " + e.text() + " " + rel + " is " + val + " " +
              filler_run(rng, w, 5));
          break;
        case 1:
          add("known for its " + val + " " + rel + " the " + e.text() + " " + filler_run(rng, w, 7));
          break;
        default:
          add(filler_run(rng, w, 5) + " " + e.text() + " has " + val + " as its " + rel + " " +
              filler_run(rng, w, 3));
          break;
      }
    }
    for (std::size_t g = 0; g < c.generic_passages_per_entity; ++g) {
      add(filler_run(rng, w, 4) + " the " + e.text() + " is " + filler_run(rng, w, 8));
    }
  }
  for (std::size_t cat = 0; cat < c.categories; ++cat) {
    for (std::size_t r = 0; r < c.relations; ++r) {
      for (std::size_t k = 0; k < c.distractors_per_category_relation; ++k) {
        const auto& val = w.values[r][rng.index(c.values_per_relation)];
        add(filler_run(rng, w, 4) + " a " + w.categories[cat] + " " + w.relations[r] + " can be " +
            val + " " + filler_run(rng, w, 5));
      }
    }
  }
  while (out.passages.size() < c.total_passages) {
    std::string text = filler_run(rng, w, 6);
    if (rng.uniform() < 0.5) text += " " + w.categories[rng.index(c.categories)];
    text += " " + filler_run(rng, w, 8);
    add(std::move(text));
  }

  auto other_category_entity = [&](std::size_t cat, const std::set<std::size_t>& avoid) {
    for (;;) {
      const auto i = rng.index(w.entities.size());
      if (w.entities[i].category != cat && !avoid.contains(i)) return i;
    }
  };

  auto make_query = [&](const std::string& id) {
    const auto subject = rng.index(w.entities.size());
    const auto& s = w.entities[subject];
    const auto r = rng.index(c.relations);
    const auto& rel = w.relations[r];
    const auto& answer = w.values[r][s.value[r]];

    QueryExample q;
    q.id = id;
    q.question = "what is the " + rel + " of this " + w.categories[s.category];
    q.caption = "a photo of a " + w.categories[s.category] + " next to " + filler_run(rng, w, 2);
    q.answers = {answer};

    std::set<std::size_t> used{subject};
    auto noise = [&] {
      const auto i = other_category_entity(s.category, used);
      used.insert(i);
      return w.entities[i].text();
    };
    auto push = [&](std::string text, EntitySource src) {
      Entity e{std::move(text), src, std::nullopt};
      if (std::find(q.entities.begin(), q.entities.end(), e) == q.entities.end()) {
        q.entities.push_back(std::move(e));
      }
    };
    push(rel, EntitySource::question);
    push(rng.uniform() < c.subject_in_sub_question ? s.text() : noise(), EntitySource::sub_question);

    std::vector<std::string> cands{s.text(), noise(), noise()};
    if (rng.uniform() < c.answer_in_candidates) cands.push_back(answer);
    rng.shuffle(cands);
    for (auto& t : cands) push(std::move(t), EntitySource::candidate);

    std::vector<std::string> tags{noise(), noise()};
    if (rng.uniform() < c.subject_in_tags) tags.push_back(s.text());
    rng.shuffle(tags);
    for (auto& t : tags) push(std::move(t), EntitySource::tag);

    push(noise(), EntitySource::wikidata);
    push(w.categories[s.category], EntitySource::caption);
    validate(q);
    return q;
  };

  char id[32];
  for (std::size_t i = 0; i < c.train_queries; ++i) {
    std::snprintf(id, sizeof id, "train%04zu", i);
    out.train_queries.push_back(make_query(id));
  }
  for (std::size_t i = 0; i < c.test_queries; ++i) {
    std::snprintf(id, sizeof id, "test%04zu", i);
    out.test_queries.push_back(make_query(id));
  }
  return out;
}

}  // namespace efr
