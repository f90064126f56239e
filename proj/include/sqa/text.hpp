#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace sqa {

enum class TokenizerMode { UnicodeWord, Char };

/// Pure function of (mode, lowercase, stopwords, text).
struct Tokenizer {
    TokenizerMode mode = TokenizerMode::UnicodeWord;
    bool lowercase = true;
    std::unordered_set<std::string> stopwords;

    /// Tokens with stopwords removed.
    std::vector<std::string> tokenize(std::string_view text) const;

    bool is_stopword(const std::string& token) const { return stopwords.count(token) != 0; }
};

std::unordered_set<std::string> load_stopwords(const std::string& path);
void save_stopwords(const std::string& path, const std::unordered_set<std::string>& words);

/// Small English function-word list.
std::unordered_set<std::string> default_stopwords();

std::string to_string(TokenizerMode mode);
TokenizerMode parse_tokenizer_mode(std::string_view name);

}  // namespace sqa
