#include "efr/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace efr {
namespace {

bool is_ascii_boundary(unsigned char c) {
  return c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c));
}

// Length in bytes of a Unicode separator or punctuation mark starting at
// text[i], or 0 if none. Covers NBSP, the U+2000..U+202F block (spaces,
// dashes, quotes, bullets), U+205F and U+3000..U+3002.
std::size_t unicode_boundary_len(std::string_view text, std::size_t i) {
  auto at = [&](std::size_t k) -> unsigned char {
    return k < text.size() ? static_cast<unsigned char>(text[k]) : 0;
  };
  const unsigned char c0 = at(i);
  if (c0 == 0xC2 && at(i + 1) == 0xA0) return 2;
  if (c0 == 0xE2 && at(i + 1) == 0x80 && at(i + 2) >= 0x80 && at(i + 2) <= 0xAF) return 3;
  if (c0 == 0xE2 && at(i + 1) == 0x81 && at(i + 2) == 0x9F) return 3;
  if (c0 == 0xE3 && at(i + 1) == 0x80 && at(i + 2) >= 0x80 && at(i + 2) <= 0x82) return 3;
  return 0;
}

constexpr std::array<std::string_view, 3> kArticles{"a", "an", "the"};

constexpr std::array<std::string_view, 33> kStopwords{
    "a",    "an",   "and",  "are",  "as",   "at",    "be",   "by",   "for",
    "from", "has",  "he",   "in",   "is",   "it",    "its",  "of",   "on",
    "or",   "that", "the",  "this", "to",   "was",   "were", "will", "with",
    "what", "which", "who", "how",  "does", "these"};

bool is_article(std::string_view t) {
  return std::find(kArticles.begin(), kArticles.end(), t) != kArticles.end();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_boundary(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
      ++i;
      continue;
    }
    if (std::size_t n = unicode_boundary_len(text, i); n > 0) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
      i += n;
      continue;
    }
    cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    ++i;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> tokenize(std::string_view text, const TextOptions& opts) {
  auto toks = tokenize(text);
  if (opts.stopwords) {
    std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  }
  if (opts.stem) {
    for (auto& t : toks) t = stem_token(std::move(t));
  }
  return toks;
}

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::string stem_token(std::string t) {
  auto ends_with = [&](std::string_view suf) { return t.ends_with(suf); };
  for (;;) {
    if (t.size() < 4) return t;
    if (ends_with("es")) {
      const std::string_view stem(t.data(), t.size() - 2);
      if (stem.ends_with("s") || stem.ends_with("x") || stem.ends_with("z") ||
          stem.ends_with("o") || stem.ends_with("ch") || stem.ends_with("sh")) {
        t.resize(t.size() - 2);
        continue;
      }
    }
    if (ends_with("s") && !ends_with("ss")) {
      t.pop_back();
      continue;
    }
    return t;
  }
}

std::vector<std::string> normalized_tokens(std::string_view raw, bool stem) {
  auto toks = tokenize(raw);
  std::erase_if(toks, [](const std::string& t) { return is_article(t); });
  if (stem) {
    for (auto& t : toks) t = stem_token(std::move(t));
    // "thes" stems to an article
    std::erase_if(toks, [](const std::string& t) { return is_article(t); });
  }
  return toks;
}

std::string normalize_text(std::string_view raw, bool stem) {
  std::string out;
  for (const auto& t : normalized_tokens(raw, stem)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

bool contains_token_run(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace efr
