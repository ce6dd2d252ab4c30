#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dip/error.hpp"

namespace dip {

using TokenId = int32_t;
using TokenSeq = std::vector<TokenId>;

/// Reserved special tokens. Ids 0..7 are fixed so that fixtures and
/// serialized artifacts stay stable across vocabularies.
namespace tok {

inline constexpr TokenId kBlank = 0;       // [BLANK]
inline constexpr TokenId kEventOpen = 1;   // <event>
inline constexpr TokenId kEventClose = 2;  // </event>
inline constexpr TokenId kPreOpen = 3;     // <pre>
inline constexpr TokenId kPreClose = 4;    // </pre>
inline constexpr TokenId kControl = 5;     // <E>
inline constexpr TokenId kSep = 6;         // <sep>
inline constexpr TokenId kEos = 7;         // <eos>
inline constexpr int kNumSpecial = 8;

inline constexpr const char* kBlankStr = "[BLANK]";
inline constexpr const char* kEventOpenStr = "<event>";
inline constexpr const char* kEventCloseStr = "</event>";
inline constexpr const char* kPreOpenStr = "<pre>";
inline constexpr const char* kPreCloseStr = "</pre>";
inline constexpr const char* kControlStr = "<E>";
inline constexpr const char* kSepStr = "<sep>";
inline constexpr const char* kEosStr = "<eos>";

/// String forms indexed by id 0..7.
const std::vector<std::string>& special_strings();

bool is_special_string(std::string_view s);

}  // namespace tok

/// Bidirectional token <-> id mapping. Ids 0..7 are always the special
/// tokens; content words follow in insertion order.
class Vocab {
 public:
  Vocab();

  /// Specials plus the given content words, in order. Words must be
  /// distinct and must not collide with the special token strings.
  explicit Vocab(const std::vector<std::string>& words);

  /// Appends a word if absent; returns its id either way.
  TokenId add(const std::string& word);

  /// Throws VocabError for unknown tokens.
  TokenId id(std::string_view word) const;

  std::optional<TokenId> find(std::string_view word) const;

  const std::string& token(TokenId id) const;

  size_t size() const { return tokens_.size(); }

  bool is_special(TokenId id) const { return id >= 0 && id < tok::kNumSpecial; }

  TokenSeq encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace dip
