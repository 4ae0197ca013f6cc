#include "efr/corpus.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"
#include "efr/text.hpp"

namespace efr {

using ojson = nlohmann::ordered_json;

std::string_view to_string(EntitySource s) {
  switch (s) {
    case EntitySource::question: return "question";
    case EntitySource::sub_question: return "sub_question";
    case EntitySource::candidate: return "candidate";
    case EntitySource::tag: return "tag";
    case EntitySource::wikidata: return "wikidata";
    case EntitySource::caption: return "caption";
  }
  return "question";
}

EntitySource parse_entity_source(std::string_view name) {
  for (auto s : kAllSources) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown entity source \"" + std::string(name) + "\"");
}

Passage make_passage(std::string id, std::string text) {
  if (id.empty()) throw InvalidArgument("passage id is empty");
  if (text.empty()) throw InvalidArgument("passage " + id + " has empty text");
  Passage p{std::move(id), std::move(text), 0};
  p.token_count = tokenize(p.text).size();
  return p;
}

void validate(const QueryExample& q) {
  if (q.id.empty()) throw InvalidArgument("query id is empty");
  if (q.question.empty()) throw InvalidArgument("query " + q.id + ": empty question");
  if (q.answers.empty()) throw InvalidArgument("query " + q.id + ": no answers");
  std::set<std::pair<std::string, EntitySource>> seen;
  for (const auto& e : q.entities) {
    if (e.text.empty()) throw InvalidArgument("query " + q.id + ": empty entity text");
    if (!seen.emplace(e.text, e.source).second) {
      throw InvalidArgument("query " + q.id + ": duplicate entity \"" + e.text + "\" (" +
                            std::string(to_string(e.source)) + ")");
    }
  }
}

PhraseMatcher::PhraseMatcher(std::span<const std::string> phrases, bool stem) {
  for (const auto& a : phrases) {
    auto toks = normalized_tokens(a, stem);
    if (!toks.empty()) runs_.push_back(std::move(toks));
  }
}

PhraseMatcher PhraseMatcher::for_answers(std::span<const std::string> answers, bool stem) {
  PhraseMatcher m(answers, stem);
  if (m.empty()) throw InvalidArgument("answer set normalizes to empty; gold is undefined");
  return m;
}

bool PhraseMatcher::matches(const std::vector<std::string>& normalized_passage) const {
  for (const auto& run : runs_) {
    if (contains_token_run(normalized_passage, run)) return true;
  }
  return false;
}

bool contains_answer(const Passage& passage, std::span<const std::string> answers, bool stem) {
  if (answers.empty()) throw InvalidArgument("contains_answer: empty answer set");
  const auto m = PhraseMatcher::for_answers(answers, stem);
  return m.matches(normalized_tokens(passage.text, stem));
}

Corpus::Corpus(std::vector<Passage> passages, bool stem)
    : passages_(std::move(passages)), stem_(stem) {
  normalized_.reserve(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    if (!by_id_.emplace(passages_[i].id, i).second) {
      throw InvalidArgument("duplicate passage id " + passages_[i].id);
    }
    normalized_.push_back(normalized_tokens(passages_[i].text, stem_));
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw InvalidArgument("unknown passage id " + std::string(id));
}

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, lineno);
  }
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t lineno,
                            const std::string& what) {
  throw FormatError(path.string() + ": malformed record at line " + std::to_string(lineno) +
                    ": " + what);
}

}  // namespace

std::vector<Passage> load_corpus(const std::filesystem::path& path) {
  std::vector<Passage> out;
  std::set<std::string> ids;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    Passage p;
    try {
      const auto j = ojson::parse(line);
      p = make_passage(j.at("id").get<std::string>(), j.at("text").get<std::string>());
    } catch (const std::exception& e) {
      fail_line(path, lineno, e.what());
    }
    if (!ids.insert(p.id).second) {
      throw FormatError("duplicate id at line " + std::to_string(lineno) + ": " + p.id);
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<QueryExample> load_queries(const std::filesystem::path& path) {
  std::vector<QueryExample> out;
  std::set<std::string> ids;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    QueryExample q;
    try {
      const auto j = ojson::parse(line);
      q.id = j.at("id").get<std::string>();
      q.question = j.at("question").get<std::string>();
      q.caption = j.value("caption", std::string{});
      q.answers = j.at("answers").get<std::vector<std::string>>();
      if (j.contains("entities")) {
        for (const auto& e : j.at("entities")) {
          Entity ent;
          ent.text = e.at("text").get<std::string>();
          ent.source = parse_entity_source(e.at("source").get<std::string>());
          if (e.contains("oracle")) ent.oracle_label = e.at("oracle").get<bool>();
          q.entities.push_back(std::move(ent));
        }
      }
      validate(q);
    } catch (const std::exception& e) {
      fail_line(path, lineno, e.what());
    }
    if (!ids.insert(q.id).second) {
      throw FormatError("duplicate id at line " + std::to_string(lineno) + ": " + q.id);
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::string to_json_line(const Passage& p) {
  ojson j;
  j["id"] = p.id;
  j["text"] = p.text;
  return j.dump();
}

std::string to_json_line(const QueryExample& q) {
  ojson j;
  j["id"] = q.id;
  j["question"] = q.question;
  j["caption"] = q.caption;
  j["answers"] = q.answers;
  j["entities"] = ojson::array();
  for (const auto& e : q.entities) {
    ojson je;
    je["text"] = e.text;
    je["source"] = std::string(to_string(e.source));
    if (e.oracle_label) je["oracle"] = *e.oracle_label;
    j["entities"].push_back(std::move(je));
  }
  return j.dump();
}

void save_corpus(const std::filesystem::path& path, std::span<const Passage> passages) {
  std::string buf;
  for (const auto& p : passages) buf += to_json_line(p) + '\n';
  write_file(path, buf);
}

void save_queries(const std::filesystem::path& path, std::span<const QueryExample> queries) {
  std::string buf;
  for (const auto& q : queries) buf += to_json_line(q) + '\n';
  write_file(path, buf);
}

}  // namespace efr
