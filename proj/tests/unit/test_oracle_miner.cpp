#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "efr/error.hpp"
#include "efr/oracle_miner.hpp"
#include "efr/synth.hpp"
#include "helpers.hpp"

using namespace efr;

namespace {

std::vector<SparseHit> ranked(std::initializer_list<const char*> ids) {
  std::vector<SparseHit> out;
  std::size_t r = 1;
  for (const char* id : ids) out.push_back({id, 10.0 - static_cast<double>(r), r}), ++r;
  return out;
}

Corpus five_corpus() {
  return Corpus({make_passage("a", "capsicum here"), make_passage("b", "nothing"),
                 make_passage("c", "capsicum again"), make_passage("d", "no"),
                 make_passage("e", "a capsicum")});
}

QueryExample question(const std::string& q, std::vector<std::string> answers,
                      std::vector<Entity> entities = {}) {
  return {"q", q, "", std::move(answers), std::move(entities)};
}

const std::vector<Passage> kPromote{
    make_passage("d1", "vegetable market stalls"),
    make_passage("d2", "this vegetable is green"),
    make_passage("d3", "what a vegetable"),
    make_passage("d4", "vegetable garden"),
    make_passage("d5", "is this a vegetable"),
    make_passage("d6", "vegetable prices rise"),
    make_passage("ans", "the bell pepper also called capsicum")};

const std::vector<Passage> kDemote{
    make_passage("ans", "this vegetable is capsicum"),
    make_passage("toy", "teddy bear vegetable"),
    make_passage("x1", "a quiet river"),
    make_passage("x2", "mountain air")};

}  // namespace

TEST_CASE("srr hand values") {
  const auto c = five_corpus();
  const std::vector<std::string> ans{"capsicum"};
  CHECK(srr(ranked({"b", "d"}), ans, c) == 0.0);
  CHECK(std::abs(srr(ranked({"a", "b", "c", "d"}), ans, c) - (1.0 + 1.0 / 3.0)) < 1e-12);
  const Corpus all({make_passage("1", "x"), make_passage("2", "x"), make_passage("3", "x"),
                    make_passage("4", "x"), make_passage("5", "x")});
  CHECK(std::abs(srr(ranked({"1", "2", "3", "4", "5"}), std::vector<std::string>{"x"}, all) -
                 (1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2)) < 1e-12);
  CHECK_THROWS_AS(srr(std::vector<SparseHit>{{"a", 1.0, 2}}, ans, c), InvalidArgument);
}

TEST_CASE("srr is bounded by the harmonic number and monotone in rank") {
  const auto c = five_corpus();
  const std::vector<std::string> ans{"capsicum"};
  const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  std::vector<std::string> perm = ids;
  std::sort(perm.begin(), perm.end());
  do {
    std::vector<SparseHit> hits;
    for (std::size_t i = 0; i < perm.size(); ++i) hits.push_back({perm[i], 0.0, i + 1});
    const double v = srr(hits, ans, c);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2 + 1e-12);
    // swapping a gold passage upward past a non-gold one never lowers srr
    for (std::size_t i = 1; i < hits.size(); ++i) {
      const bool gold_below = contains_answer(c[c.index_of(hits[i].passage_id)], ans);
      if (!gold_below) continue;
      auto up = hits;
      std::swap(up[i - 1].passage_id, up[i].passage_id);
      CHECK(srr(up, ans, c) >= v - 1e-15);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("entity_gain: planted entity lifts the answer passage from absent to rank 1") {
  const auto idx = InvertedIndex::build(kPromote);
  const Corpus corpus(kPromote);
  const auto q = question("what vegetable is this", {"capsicum"});
  const Entity bell{"bell pepper", EntitySource::candidate, {}};

  const auto base = idx.search(idx.query_terms(q.question), 5);
  CHECK(std::none_of(base.begin(), base.end(), [](const SparseHit& h) { return h.passage_id == "ans"; }));
  const auto aug = idx.search(augment_query(q.question, bell), 5);
  REQUIRE_FALSE(aug.empty());
  CHECK(aug[0].passage_id == "ans");

  const auto s = entity_gain(idx, corpus, q, bell, 5, 0.8);
  CHECK(s.gain == 1.0);
  CHECK(s.is_oracle);
  CHECK(s.entity.oracle_label == true);
}

TEST_CASE("entity_gain: distractor demotes the answer passage from rank 1 to 2") {
  const auto idx = InvertedIndex::build(kDemote);
  const Corpus corpus(kDemote);
  const auto q = question("what vegetable is this", {"capsicum"});
  const Entity toy{"teddy bear", EntitySource::tag, {}};
  const auto s = entity_gain(idx, corpus, q, toy, 5, 0.8);
  CHECK(s.gain == -0.5);
  CHECK_FALSE(s.is_oracle);
}

TEST_CASE("entity_gain is zero when retrieval is unchanged") {
  const auto idx = InvertedIndex::build(kDemote);
  const Corpus corpus(kDemote);
  const auto q = question("what vegetable is this", {"capsicum"});
  const auto s = entity_gain(idx, corpus, q, Entity{"zzyzx", EntitySource::tag, {}}, 5, 0.8);
  CHECK(s.gain == 0.0);
  CHECK_FALSE(s.is_oracle);
  CHECK_THROWS_AS(entity_gain(idx, corpus, q, Entity{"x", EntitySource::tag, {}}, 0, 0.8), InvalidArgument);
}

TEST_CASE("pair_up cycles the shorter list") {
  const auto pairs = pair_up({"p"}, {"n1", "n2"}, 99);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first == "p");
  CHECK(pairs[1].first == "p");
  CHECK(std::set<std::string>{pairs[0].second, pairs[1].second} == std::set<std::string>{"n1", "n2"});

  const std::vector<std::string> pos{"p1", "p2", "p3"};
  std::vector<std::string> neg;
  for (int i = 0; i < 7; ++i) neg.push_back("n" + std::to_string(i));
  const auto many = pair_up(pos, neg, 5);
  CHECK(many.size() == 7);
  std::map<std::string, int> uses;
  std::set<std::string> negs;
  for (const auto& [p, n] : many) ++uses[p], negs.insert(n);
  CHECK(negs.size() == 7);
  for (const auto& p : pos) CHECK(uses[p] >= 2);
  CHECK(pair_up(pos, neg, 5) == many);
  CHECK(pair_up({}, neg, 5).empty());
}

TEST_CASE("mining examples") {
  SUBCASE("query without answer-bearing hits is dropped") {
    const auto idx = InvertedIndex::build(kDemote);
    const Corpus corpus(kDemote);
    const std::vector<QueryExample> qs{question("what vegetable is this", {"turnip"})};
    const auto r = mine_training_set(idx, corpus, qs, {});
    CHECK(r.instances.empty());
    CHECK(r.dropped_queries == 1);
    CHECK(r.per_query[0].dropped);
  }
  SUBCASE("one positive and two negatives give two instances sharing the positive") {
    const std::vector<Passage> ps{make_passage("pos", "this vegetable is capsicum"),
                                  make_passage("n1", "this vegetable is green"),
                                  make_passage("n2", "what a vegetable"),
                                  make_passage("far", "unrelated words")};
    const auto idx = InvertedIndex::build(ps);
    const Corpus corpus(ps);
    const std::vector<QueryExample> qs{question("what vegetable is this", {"capsicum"})};
    const auto r = mine_training_set(idx, corpus, qs, {});
    REQUIRE(r.instances.size() == 2);
    CHECK(r.instances[0].positive_id == "pos");
    CHECK(r.instances[1].positive_id == "pos");
    CHECK(std::set<std::string>{r.instances[0].negative_id, r.instances[1].negative_id} ==
          std::set<std::string>{"n1", "n2"});
  }
  SUBCASE("oracle entity whose joint passage is already a positive adds nothing") {
    const std::vector<Passage> ps{make_passage("pos", "bell pepper is capsicum"),
                                  make_passage("n1", "what vegetable is this"),
                                  make_passage("n2", "this is what")};
    const auto idx = InvertedIndex::build(ps);
    const Corpus corpus(ps);
    QueryExample q = question("what is this", {"capsicum"}, {{"bell pepper", EntitySource::candidate, {}}});
    MinerConfig cfg;
    cfg.theta = -INFINITY;
    const auto m = mine_query(idx, corpus, q, cfg);
    CHECK(m.positives == std::vector<std::string>{"pos"});
    CHECK(m.entity_scores[0].is_oracle);
  }
  SUBCASE("oracle entity adds its first joint passage") {
    auto ps = kPromote;
    ps.push_back(make_passage("old", "this vegetable is capsicum"));
    const auto idx = InvertedIndex::build(ps);
    const Corpus corpus(ps);
    const QueryExample q =
        question("what vegetable is this", {"capsicum"}, {{"bell pepper", EntitySource::candidate, {}}});
    MinerConfig cfg;
    cfg.theta = -1.0;
    const auto m = mine_query(idx, corpus, q, cfg);
    CHECK(m.positives == std::vector<std::string>{"old", "ans"});
  }
  CHECK_THROWS_AS(mine_training_set(InvertedIndex::build(kDemote), Corpus(kDemote), {}, {}), InvalidArgument);
}

TEST_CASE("mined instances satisfy containment invariants and are deterministic") {
  SynthConfig sc;
  sc.total_passages = 1200;
  sc.entities_per_category = 10;
  sc.train_queries = 60;
  sc.test_queries = 1;
  const auto data = generate_synthetic(sc);
  const auto idx = InvertedIndex::build(data.passages);
  const Corpus corpus(data.passages);
  MinerConfig cfg;
  cfg.init_depth = 50;
  const auto a = mine_training_set(idx, corpus, data.train_queries, cfg);
  const auto b = mine_training_set(idx, corpus, data.train_queries, cfg);
  REQUIRE_FALSE(a.instances.empty());

  std::map<std::string, const QueryExample*> by_id;
  for (const auto& q : data.train_queries) by_id[q.id] = &q;
  for (const auto& t : a.instances) {
    const auto& q = *by_id.at(t.query_id);
    CHECK(contains_answer(corpus[corpus.index_of(t.positive_id)], q.answers));
    CHECK_FALSE(contains_answer(corpus[corpus.index_of(t.negative_id)], q.answers));
    CHECK(t.positive_id != t.negative_id);
    CHECK(t.entities.size() == q.entities.size());
    for (const auto& e : t.entities) CHECK(e.oracle_label.has_value());
  }
  for (const auto& m : a.per_query) {
    for (const auto& s : m.entity_scores) CHECK(s.is_oracle == (s.gain > cfg.theta));
    CHECK(m.srr_init >= 0.0);
  }

  REQUIRE(a.instances.size() == b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    CHECK(a.instances[i].positive_id == b.instances[i].positive_id);
    CHECK(a.instances[i].negative_id == b.instances[i].negative_id);
  }

  test::TempDir dir("mine");
  save_training_set(dir / "t.jsonl", a.instances);
  const auto loaded = load_training_set(dir / "t.jsonl");
  REQUIRE(loaded.size() == a.instances.size());
  CHECK(loaded.front().entities == a.instances.front().entities);
  save_entity_scores(dir / "s.jsonl", a.per_query);
  const auto scores = load_entity_scores(dir / "s.jsonl");
  std::size_t n = 0;
  for (const auto& [qid, list] : scores) n += list.size();
  std::size_t m = 0;
  for (const auto& q : a.per_query) m += q.entity_scores.size();
  CHECK(n == m);
}
