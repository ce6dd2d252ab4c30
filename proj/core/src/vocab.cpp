#include "dip/vocab.hpp"

#include <algorithm>

namespace dip {
namespace tok {

const std::vector<std::string>& special_strings() {
  static const std::vector<std::string> strings = {
      kBlankStr, kEventOpenStr, kEventCloseStr, kPreOpenStr,
      kPreCloseStr, kControlStr, kSepStr, kEosStr};
  return strings;
}

bool is_special_string(std::string_view s) {
  const auto& specials = special_strings();
  return std::find(specials.begin(), specials.end(), s) != specials.end();
}

}  // namespace tok

Vocab::Vocab() {
  for (const auto& s : tok::special_strings()) {
    index_.emplace(s, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(s);
  }
}

Vocab::Vocab(const std::vector<std::string>& words) : Vocab() {
  for (const auto& w : words) {
    if (tok::is_special_string(w)) {
      throw VocabError("content word collides with special token: " + w);
    }
    if (index_.count(w)) {
      throw VocabError("duplicate vocabulary word: " + w);
    }
    index_.emplace(w, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(w);
  }
}

TokenId Vocab::add(const std::string& word) {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  TokenId id = static_cast<TokenId>(tokens_.size());
  index_.emplace(word, id);
  tokens_.push_back(word);
  return id;
}

TokenId Vocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    throw VocabError("unknown token: " + std::string(word));
  }
  return it->second;
}

std::optional<TokenId> Vocab::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
    throw VocabError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<size_t>(id)];
}

TokenSeq Vocab::encode(std::span<const std::string> words) const {
  TokenSeq ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (TokenId id : ids) words.push_back(token(id));
  return words;
}

}  // namespace dip
