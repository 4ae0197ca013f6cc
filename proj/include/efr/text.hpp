#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace efr {

struct TextOptions {
  // Strip plural suffixes ("s", and "es" after s/x/z/o/ch/sh) from tokens of
  // length >= 4, repeated to a fixed point.
  bool stem = false;
  // Drop a small closed list of English function words (BM25 only).
  bool stopwords = false;
};

/// Lowercased tokens, split on whitespace and punctuation. Non-ASCII bytes
/// are kept as word characters; Unicode space separators are boundaries.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() followed by the optional stemming / stopword filters.
std::vector<std::string> tokenize(std::string_view text, const TextOptions& opts);

std::string stem_token(std::string token);
bool is_stopword(std::string_view token);

/// Canonical answer form: lowercase, punctuation to spaces, articles
/// ("a", "an", "the") removed, single spaces, trimmed.
std::string normalize_text(std::string_view raw, bool stem = false);

/// Tokens of normalize_text(raw).
std::vector<std::string> normalized_tokens(std::string_view raw, bool stem = false);

/// True iff `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
bool contains_token_run(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle);

}  // namespace efr
