#include "sqa/dataset.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <unordered_set>

namespace sqa {

using nlohmann::json;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "dev") return Split::Dev;
    if (name == "test") return Split::Test;
    throw DataError("unknown split \"" + std::string(name) + "\"");
}

Qrels::Qrels(std::vector<RelevanceAnnotation> annotations) {
    for (auto& a : annotations) {
        auto& set = relevant_[a.question_id];
        set.insert(a.relevant_paragraph_ids.begin(), a.relevant_paragraph_ids.end());
    }
}

Qrels::Qrels(const Qrels& other) : relevant_(other.relevant_), accesses_(other.accesses_.load()) {}

Qrels& Qrels::operator=(const Qrels& other) {
    relevant_ = other.relevant_;
    accesses_ = other.accesses_.load();
    return *this;
}

const std::set<std::string>& Qrels::relevant(const std::string& question_id) const {
    static const std::set<std::string> empty;
    ++accesses_;
    auto it = relevant_.find(question_id);
    return it == relevant_.end() ? empty : it->second;
}

bool Qrels::contains(const std::string& question_id) const {
    ++accesses_;
    return relevant_.count(question_id) != 0;
}

std::vector<RelevanceAnnotation> Qrels::annotations() const {
    std::vector<RelevanceAnnotation> out;
    for (const auto& [qid, ids] : relevant_) out.push_back({qid, {ids.begin(), ids.end()}});
    return out;
}

namespace {

std::string where(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line) + ": ";
}

const json& require(const json& record, const char* field, const std::string& at) {
    auto it = record.find(field);
    if (it == record.end()) throw DataError(at + "missing field \"" + field + "\"");
    return *it;
}

std::string require_string(const json& record, const char* field, const std::string& at) {
    const json& v = require(record, field, at);
    if (!v.is_string()) throw DataError(at + "field \"" + field + "\" must be a string");
    return v.get<std::string>();
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

std::vector<Question> parse_questions(std::istream& in, const std::string& source) {
    std::vector<Question> questions;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const std::string at = where(source, line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(at + "invalid JSON: " + e.what());
        }
        if (!record.is_object()) throw DataError(at + "record is not an object");

        Question q;
        q.id = require_string(record, "id", at);
        const std::string at_id = at + "question \"" + q.id + "\": ";
        q.scenario = require_string(record, "scenario", at_id);
        q.question = require_string(record, "question", at_id);
        const json& options = require(record, "options", at_id);
        if (!options.is_array()) throw DataError(at_id + "field \"options\" must be an array");
        for (const auto& o : options) {
            if (!o.is_string()) throw DataError(at_id + "option is not a string");
            if (o.get<std::string>().empty()) throw DataError(at_id + "empty option text");
            q.options.push_back(o.get<std::string>());
        }
        if (q.options.size() < 2) throw DataError(at_id + "needs at least 2 options");
        const json& answer = require(record, "answer", at_id);
        if (!answer.is_number_integer()) throw DataError(at_id + "field \"answer\" must be an integer");
        const auto a = answer.get<long long>();
        if (a < 0 || a >= static_cast<long long>(q.options.size()))
            throw DataError(at_id + "answer index out of range");
        q.answer = static_cast<int>(a);
        try {
            q.split = parse_split(require_string(record, "split", at_id));
        } catch (const DataError& e) {
            throw DataError(at_id + e.what());
        }
        if (!seen.insert(q.id).second) throw DataError(at_id + "duplicate question id");
        questions.push_back(std::move(q));
    }
    return questions;
}

std::vector<Question> load_questions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read questions file: " + path);
    return parse_questions(in, path);
}

void save_questions(const std::string& path, const std::vector<Question>& questions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& q : questions) {
        json record = {{"id", q.id},
                       {"scenario", q.scenario},
                       {"question", q.question},
                       {"options", q.options},
                       {"answer", q.answer},
                       {"split", std::string(to_string(q.split))}};
        out << record.dump() << '\n';
    }
}

CorpusLoad parse_corpus(std::istream& in, const Tokenizer& tokenizer, const std::string& source) {
    CorpusLoad load;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const std::string at = where(source, line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(at + "invalid JSON: " + e.what());
        }
        if (!record.is_object()) throw DataError(at + "record is not an object");
        Paragraph p;
        p.id = require_string(record, "id", at);
        p.text = require_string(record, "text", at + "paragraph \"" + p.id + "\": ");
        if (!seen.insert(p.id).second) throw DataError(at + "duplicate paragraph id \"" + p.id + "\"");
        p.tokens = tokenizer.tokenize(p.text);
        if (p.tokens.empty()) {
            ++load.dropped;
            continue;
        }
        load.paragraphs.push_back(std::move(p));
    }
    if (load.dropped > 0)
        std::cerr << "warning: " << source << ": dropped " << load.dropped
                  << " paragraph(s) with no tokens after filtering\n";
    return load;
}

CorpusLoad load_corpus(const std::string& path, const Tokenizer& tokenizer) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read corpus file: " + path);
    return parse_corpus(in, tokenizer, path);
}

void save_corpus(const std::string& path, const std::vector<Paragraph>& paragraphs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& p : paragraphs) out << json{{"id", p.id}, {"text", p.text}}.dump() << '\n';
}

Qrels load_qrels(const std::string& path, const std::vector<Paragraph>& corpus) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read qrels file: " + path);
    std::unordered_set<std::string> ids;
    for (const auto& p : corpus) ids.insert(p.id);
    std::vector<RelevanceAnnotation> annotations;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const std::string at = where(path, line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(at + "invalid JSON: " + e.what());
        }
        RelevanceAnnotation a;
        a.question_id = require_string(record, "question_id", at);
        const json& rel = require(record, "relevant_paragraph_ids", at);
        if (!rel.is_array()) throw DataError(at + "relevant_paragraph_ids must be an array");
        for (const auto& r : rel) {
            if (!r.is_string()) throw DataError(at + "paragraph id is not a string");
            auto id = r.get<std::string>();
            if (!ids.count(id)) throw DataError(at + "unknown paragraph id \"" + id + "\"");
            a.relevant_paragraph_ids.push_back(std::move(id));
        }
        annotations.push_back(std::move(a));
    }
    return Qrels(std::move(annotations));
}

void save_qrels(const std::string& path, const std::vector<RelevanceAnnotation>& annotations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& a : annotations)
        out << json{{"question_id", a.question_id}, {"relevant_paragraph_ids", a.relevant_paragraph_ids}}.dump()
            << '\n';
}

std::vector<const Question*> select_split(const std::vector<Question>& questions, Split split) {
    std::vector<const Question*> out;
    for (const auto& q : questions)
        if (q.split == split) out.push_back(&q);
    return out;
}

}  // namespace sqa
