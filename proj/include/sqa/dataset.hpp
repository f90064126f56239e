#pragma once

#include "sqa/common.hpp"
#include "sqa/text.hpp"

#include <atomic>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sqa {

enum class Split { Train, Dev, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Question {
    std::string id;
    std::string scenario;
    std::string question;
    std::vector<std::string> options;
    int answer = 0;
    Split split = Split::Train;

    int num_options() const { return static_cast<int>(options.size()); }
    friend bool operator==(const Question&, const Question&) = default;
};

struct Paragraph {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;
};

/// Concatenation of scenario, question and one option, reduced to the words
/// that carry retrieval weight. Positions index the encoded option sequence.
struct EnrichedOption {
    std::string question_id;
    int option_index = 0;
    std::string text;
    std::vector<std::string> unique_words;
    std::vector<std::vector<int>> word_positions;

    int num_words() const { return static_cast<int>(unique_words.size()); }
};

struct RelevanceAnnotation {
    std::string question_id;
    std::vector<std::string> relevant_paragraph_ids;
};

/// Binary relevance judgements. Every lookup is counted so tests can audit
/// which code paths read the annotations.
class Qrels {
public:
    Qrels() = default;
    explicit Qrels(std::vector<RelevanceAnnotation> annotations);
    Qrels(const Qrels& other);
    Qrels& operator=(const Qrels& other);

    /// Empty set for unannotated questions.
    const std::set<std::string>& relevant(const std::string& question_id) const;
    bool contains(const std::string& question_id) const;
    std::size_t size() const { return relevant_.size(); }
    std::vector<RelevanceAnnotation> annotations() const;

    std::size_t access_count() const { return accesses_.load(); }

private:
    std::map<std::string, std::set<std::string>> relevant_;
    mutable std::atomic<std::size_t> accesses_{0};
};

struct CorpusLoad {
    std::vector<Paragraph> paragraphs;
    std::size_t dropped = 0;
};

/// One JSON object per line: id, scenario, question, options, answer, split.
/// Any malformed record rejects the whole file.
std::vector<Question> load_questions(const std::string& path);
std::vector<Question> parse_questions(std::istream& in, const std::string& source = "<stream>");
void save_questions(const std::string& path, const std::vector<Question>& questions);

/// JSONL with id and text. Paragraphs with no tokens left are dropped.
CorpusLoad load_corpus(const std::string& path, const Tokenizer& tokenizer);
CorpusLoad parse_corpus(std::istream& in, const Tokenizer& tokenizer, const std::string& source = "<stream>");
void save_corpus(const std::string& path, const std::vector<Paragraph>& paragraphs);

/// Every paragraph id must resolve against `paragraph_ids`.
Qrels load_qrels(const std::string& path, const std::vector<Paragraph>& corpus);
void save_qrels(const std::string& path, const std::vector<RelevanceAnnotation>& annotations);

std::vector<const Question*> select_split(const std::vector<Question>& questions, Split split);

}  // namespace sqa
