#include "sqa/encoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sqa {

namespace {

const char* const kSpecialTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

struct Budgeted {
    std::vector<std::string> paragraph, scenario, question, option;
};

// Cut `excess` tokens from the vector, front or back; returns what is left to cut.
std::size_t trim(std::vector<std::string>& v, std::size_t excess, bool front) {
    const std::size_t n = std::min(excess, v.size());
    if (front) {
        v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        v.resize(v.size() - n);
    }
    return excess - n;
}

SequenceLayout assemble(const Vocabulary& vocab, Budgeted parts, bool with_paragraph, int max_seq_len) {
    if (parts.option.empty()) throw DataError("option has no tokens after filtering");
    const std::size_t specials = with_paragraph ? 5 : 4;
    if (max_seq_len < static_cast<int>(specials) + 1) throw std::invalid_argument("max_seq_len too small");
    const std::size_t budget = static_cast<std::size_t>(max_seq_len) - specials;
    const std::size_t total = parts.paragraph.size() + parts.scenario.size() + parts.question.size() + parts.option.size();
    if (total > budget) {
        std::size_t excess = total - budget;
        excess = trim(parts.paragraph, excess, false);
        excess = trim(parts.scenario, excess, true);
        excess = trim(parts.question, excess, true);
        trim(parts.option, excess, false);
    }

    SequenceLayout out;
    auto push_special = [&](int id) {
        out.tokens.push_back(vocab.token(id));
        out.ids.push_back(id);
        out.segments.push_back(Segment::Special);
    };
    auto push_segment = [&](const std::vector<std::string>& tokens, Segment tag, SegmentSpan& span) {
        span.begin = out.length();
        span.length = static_cast<int>(tokens.size());
        for (const auto& t : tokens) {
            out.tokens.push_back(t);
            out.ids.push_back(vocab.id(t));
            out.segments.push_back(tag);
        }
        push_special(Vocabulary::kSep);
    };
    push_special(Vocabulary::kCls);
    if (with_paragraph) push_segment(parts.paragraph, Segment::Paragraph, out.paragraph);
    push_segment(parts.scenario, Segment::Scenario, out.scenario);
    push_segment(parts.question, Segment::Question, out.question);
    push_segment(parts.option, Segment::Option, out.option);
    if (!with_paragraph) out.paragraph.begin = 1;
    return out;
}

}  // namespace

Vocabulary::Vocabulary() {
    for (const char* t : kSpecialTokens) add(t);
}

int Vocabulary::add(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

Vocabulary Vocabulary::build(const std::vector<Question>& questions, const std::vector<Paragraph>& corpus,
                             const Tokenizer& tokenizer) {
    Vocabulary v;
    for (const auto& q : questions) {
        if (q.split != Split::Train) continue;
        for (const auto& t : tokenizer.tokenize(q.scenario)) v.add(t);
        for (const auto& t : tokenizer.tokenize(q.question)) v.add(t);
        for (const auto& o : q.options)
            for (const auto& t : tokenizer.tokenize(o)) v.add(t);
    }
    for (const auto& p : corpus)
        for (const auto& t : p.tokens) v.add(t);
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    if (lines.size() < 4) throw FormatError(path + ": vocabulary shorter than the reserved ids");
    for (int i = 0; i < 4; ++i)
        if (lines[static_cast<std::size_t>(i)] != kSpecialTokens[i])
            throw FormatError(path + ": reserved token " + std::to_string(i) + " is not " + kSpecialTokens[i]);
    Vocabulary v;
    for (std::size_t i = 4; i < lines.size(); ++i) {
        if (v.ids_.count(lines[i])) throw FormatError(path + ": duplicate token on line " + std::to_string(i + 1));
        v.add(lines[i]);
    }
    return v;
}

SequenceLayout layout_option(const Vocabulary& vocab, const OptionText& text, int max_seq_len) {
    return assemble(vocab, {{}, text.scenario, text.question, text.option}, false, max_seq_len);
}

SequenceLayout layout_with_paragraph(const Vocabulary& vocab, const std::vector<std::string>& paragraph,
                                     const OptionText& text, int max_seq_len) {
    return assemble(vocab, {paragraph, text.scenario, text.question, text.option}, true, max_seq_len);
}

EnrichedOption enrich(const std::string& question_id, int option_index, const SequenceLayout& layout) {
    EnrichedOption e;
    e.question_id = question_id;
    e.option_index = option_index;
    std::unordered_map<std::string, std::size_t> seen;
    for (int pos = 0; pos < layout.length(); ++pos) {
        const Segment s = layout.segments[static_cast<std::size_t>(pos)];
        if (s == Segment::Special || s == Segment::Paragraph) continue;
        const std::string& tok = layout.tokens[static_cast<std::size_t>(pos)];
        auto [it, inserted] = seen.emplace(tok, e.unique_words.size());
        if (inserted) {
            e.unique_words.push_back(tok);
            e.word_positions.emplace_back();
        }
        e.word_positions[it->second].push_back(pos);
        if (!e.text.empty()) e.text += ' ';
        e.text += tok;
    }
    return e;
}

Encoder Encoder::create(ParamStore& params, int vocab_size, const EncoderConfig& config, Rng& rng) {
    if (config.dim <= 0 || config.heads <= 0 || config.dim % config.heads != 0)
        throw std::invalid_argument("encoder dim must be a positive multiple of heads");
    Encoder e;
    e.config = config;
    const int d = config.dim;
    const real proj_std = 1.0 / std::sqrt(static_cast<real>(d));
    e.token_embedding = params.add("encoder.token_embedding", random_normal(vocab_size, d, 1.0, rng));
    e.position_embedding = params.add("encoder.position_embedding", random_normal(config.max_seq_len, d, 1.0, rng));
    e.query = params.add("encoder.query", random_normal(d, d, proj_std, rng));
    e.key = params.add("encoder.key", random_normal(d, d, proj_std, rng));
    e.value = params.add("encoder.value", random_normal(d, d, proj_std, rng));
    return e;
}

EncodedSequence Encoder::encode(Tape& tape, const ParamStore& params, const SequenceLayout& layout) const {
    const int len = layout.length();
    if (len > config.max_seq_len) throw std::invalid_argument("sequence longer than max_seq_len");
    std::vector<int> positions(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;

    Var x = ad::add(tape.gather_rows(params[token_embedding].value, token_embedding, layout.ids),
                    tape.gather_rows(params[position_embedding].value, position_embedding, std::move(positions)));

    EncodedSequence out{x, layout.paragraph, layout.scenario, layout.question, layout.option};
    if (!config.mixing) return out;

    Var q = ad::matmul(x, params.leaf(tape, query));
    Var k = ad::matmul(x, params.leaf(tape, key));
    Var v = ad::matmul(x, params.leaf(tape, value));
    const int head_dim = config.dim / config.heads;
    const real inv_sqrt = 1.0 / std::sqrt(static_cast<real>(head_dim));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(config.heads));
    for (int h = 0; h < config.heads; ++h) {
        const int b = h * head_dim;
        Var scores = ad::scale(ad::matmul_nt(ad::col_block(q, b, head_dim), ad::col_block(k, b, head_dim)), inv_sqrt);
        heads.push_back(ad::matmul(ad::softmax_rows(scores), ad::col_block(v, b, head_dim)));
    }
    out.states = ad::add(x, ad::concat_cols(heads));
    return out;
}

Var pool_unique_words(const EncodedSequence& encoded, const EnrichedOption& enriched) {
    return ad::max_pool_groups(encoded.states, enriched.word_positions);
}

}  // namespace sqa
