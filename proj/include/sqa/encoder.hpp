#pragma once

#include "sqa/dataset.hpp"
#include "sqa/nn.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace sqa {

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;

    Vocabulary();

    /// Specials first, then training-split question tokens, then corpus tokens,
    /// each in first-occurrence order.
    static Vocabulary build(const std::vector<Question>& questions, const std::vector<Paragraph>& corpus,
                            const Tokenizer& tokenizer);

    int id(const std::string& token) const;  // kUnk when unknown
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(tokens_.size()); }
    int add(const std::string& token);

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

enum class Segment : std::uint8_t { Special, Paragraph, Scenario, Question, Option };

struct SegmentSpan {
    int begin = 0;
    int length = 0;
};

/// Token layout of one encoder input: [CLS] (P [SEP]) S [SEP] Q [SEP] O [SEP].
struct SequenceLayout {
    std::vector<std::string> tokens;
    std::vector<int> ids;
    std::vector<Segment> segments;
    SegmentSpan paragraph, scenario, question, option;

    int length() const { return static_cast<int>(ids.size()); }
};

/// Texts of one option, already tokenized.
struct OptionText {
    std::vector<std::string> scenario;
    std::vector<std::string> question;
    std::vector<std::string> option;
};

/// Option sequence. Over-long input loses scenario tokens from the front,
/// then question tokens from the front, then option tokens from the tail.
/// Throws DataError when the option has no tokens.
SequenceLayout layout_option(const Vocabulary& vocab, const OptionText& text, int max_seq_len);

/// Paragraph-conditioned sequence; the paragraph tail is cut before anything
/// else.
SequenceLayout layout_with_paragraph(const Vocabulary& vocab, const std::vector<std::string>& paragraph,
                                     const OptionText& text, int max_seq_len);

/// Unique words of an option sequence in first-occurrence order with their
/// positions. Words cut by truncation are absent.
EnrichedOption enrich(const std::string& question_id, int option_index, const SequenceLayout& layout);

struct EncoderConfig {
    int dim = 64;
    int heads = 4;
    int max_seq_len = 256;
    /// false replaces the attention mixing by the identity (test harness).
    bool mixing = true;
};

struct EncodedSequence {
    Var states;  // T x d
    SegmentSpan paragraph, scenario, question, option;

    Var cls() const { return ad::row_block(states, 0, 1); }
    Var segment(const SegmentSpan& span) const { return ad::row_block(states, span.begin, span.length); }
};

/// Token + position embeddings followed by one residual multi-head
/// self-attention layer. Shared by the retriever and the reader.
struct Encoder {
    EncoderConfig config;
    int token_embedding = -1;
    int position_embedding = -1;
    int query = -1;
    int key = -1;
    int value = -1;

    static Encoder create(ParamStore& params, int vocab_size, const EncoderConfig& config, Rng& rng);

    EncodedSequence encode(Tape& tape, const ParamStore& params, const SequenceLayout& layout) const;
};

/// Row j is the entrywise max of the encoder states at word j's positions.
Var pool_unique_words(const EncodedSequence& encoded, const EnrichedOption& enriched);

}  // namespace sqa
