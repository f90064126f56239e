#include "sqa/text.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace sqa {

namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;
};

// Invalid bytes decode as U+FFFD of length 1.
CodePoint decode_utf8(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (i + len > s.size()) return {0xFFFD, 1};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

bool is_space(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0x00A0 ||
           c == 0x3000 || (c >= 0x2000 && c <= 0x200B);
}

bool is_punct(char32_t c) {
    if (c < 0x80) return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_');
    return (c >= 0x2010 && c <= 0x206F) ||  // general punctuation
           (c >= 0x3001 && c <= 0x303F) ||  // CJK symbols and punctuation
           (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
           (c >= 0xFF5B && c <= 0xFF65) || c == 0x00B7 || c == 0x00AB || c == 0x00BB || c == 0xFFFD;
}

// Ideographs and kana form one token per character even in word mode.
bool is_ideographic(char32_t c) {
    return (c >= 0x3040 && c <= 0x30FF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) ||
           (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x2FFFF);
}

void append_lower(std::string& out, std::string_view bytes, bool lowercase) {
    for (char ch : bytes) {
        if (lowercase && ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
        out.push_back(ch);
    }
}

}  // namespace

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (!is_stopword(current)) tokens.push_back(std::move(current));
            current.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const CodePoint cp = decode_utf8(text, i);
        const std::string_view bytes = text.substr(i, cp.length);
        i += cp.length;
        if (is_space(cp.value) || is_punct(cp.value)) {
            flush();
            continue;
        }
        if (mode == TokenizerMode::Char || is_ideographic(cp.value)) {
            flush();
            append_lower(current, bytes, lowercase);
            flush();
            continue;
        }
        append_lower(current, bytes, lowercase);
    }
    flush();
    return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read stopword file: " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        words.insert(line.substr(start));
    }
    return words;
}

void save_stopwords(const std::string& path, const std::unordered_set<std::string>& words) {
    std::vector<std::string> sorted(words.begin(), words.end());
    std::sort(sorted.begin(), sorted.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write stopword file: " + path);
    for (const auto& w : sorted) out << w << '\n';
}

std::unordered_set<std::string> default_stopwords() {
    return {"a",     "an",   "and",  "are",   "as",    "at",   "be",    "by",   "for",   "from", "has",
            "in",    "is",   "it",   "its",   "of",    "on",   "or",    "that", "the",   "this", "to",
            "was",   "were", "will", "with",  "which", "what", "who",   "whom", "whose", "why",  "how",
            "when",  "where", "does", "do",   "did",   "not",  "no",    "can",  "could", "would", "should",
            "these", "those", "there", "their", "they", "he",  "she",   "we",   "you",   "i",    "but"};
}

std::string to_string(TokenizerMode mode) { return mode == TokenizerMode::Char ? "char" : "word"; }

TokenizerMode parse_tokenizer_mode(std::string_view name) {
    if (name == "word" || name == "unicode-word") return TokenizerMode::UnicodeWord;
    if (name == "char") return TokenizerMode::Char;
    throw std::invalid_argument("unknown tokenizer mode: " + std::string(name));
}

}  // namespace sqa
