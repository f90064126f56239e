#include <doctest.h>

#include "sqa/dataset.hpp"
#include "sqa/synthetic.hpp"
#include "toy.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sqa;

namespace {

std::string record(const std::string& id, int answer, const std::string& split = "train",
                   const std::string& options = R"(["a1","b1","c1","d1"])") {
    return R"({"id":")" + id + R"(","scenario":"rain falls","question":"what grows","options":)" + options +
           R"(,"answer":)" + std::to_string(answer) + R"(,"split":")" + split + "\"}";
}

std::string error_of(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_questions(in, "q.jsonl");
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sqa_test_dataset";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("tokenizer lowercases, splits on punctuation and drops stopwords") {
    Tokenizer t;
    t.stopwords = {"the", "of"};
    CHECK(t.tokenize("The Rise of  Wheat-prices!") == std::vector<std::string>{"rise", "wheat", "prices"});
    CHECK(t.tokenize("") .empty());
    CHECK(t.tokenize("the of ,,, ...").empty());
    t.lowercase = false;
    CHECK(t.tokenize("Rice") == std::vector<std::string>{"Rice"});
}

TEST_CASE("tokenizer is a pure function of its settings and input") {
    Tokenizer a = toy::tokenizer();
    Tokenizer b = toy::tokenizer();
    const std::string text = "Which river floods the valley, every spring?";
    CHECK(a.tokenize(text) == b.tokenize(text));
    CHECK(a.tokenize(text) == a.tokenize(text));
}

TEST_CASE("ideographs become one token each; char mode splits latin words") {
    Tokenizer t;
    CHECK(t.tokenize("\xE6\xB0\xB4\xE7\x81\xAB ok") ==
          std::vector<std::string>{"\xE6\xB0\xB4", "\xE7\x81\xAB", "ok"});
    t.mode = TokenizerMode::Char;
    CHECK(t.tokenize("ab c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("stopword files round trip") {
    const auto path = scratch("stop.txt").string();
    const std::unordered_set<std::string> words{"alpha", "beta", "\xE7\x9A\x84"};
    save_stopwords(path, words);
    CHECK(load_stopwords(path) == words);
}

TEST_CASE("a valid record maps field by field") {
    std::istringstream in(record("q1", 2));
    const auto qs = parse_questions(in);
    REQUIRE(qs.size() == 1);
    CHECK(qs[0].id == "q1");
    CHECK(qs[0].num_options() == 4);
    CHECK(qs[0].answer == 2);
    CHECK(qs[0].split == Split::Train);
    CHECK(qs[0].scenario == "rain falls");
}

TEST_CASE("malformed question files are rejected with their line") {
    CHECK(error_of(record("q1", 4)).find("answer index out of range") != std::string::npos);
    CHECK(error_of(record("q1", -1)).find("answer index out of range") != std::string::npos);
    const std::string dup = error_of(record("q1", 0) + "\n" + record("q1", 1));
    CHECK(dup.find("duplicate question id") != std::string::npos);
    CHECK(dup.find("q.jsonl:2") != std::string::npos);
    const std::string missing = error_of(record("q1", 0) + "\n\n" + R"({"id":"q2","question":"x","options":["a","b"],"answer":0,"split":"dev"})");
    CHECK(missing.find("missing field \"scenario\"") != std::string::npos);
    CHECK(missing.find("q.jsonl:3") != std::string::npos);
    CHECK(error_of(record("q1", 0, "train", R"(["only"])")).find("at least 2 options") != std::string::npos);
    CHECK(error_of(record("q1", 0, "train", R"(["", "b"])")).find("empty option") != std::string::npos);
    CHECK(error_of(record("q1", 0, "holdout")).find("unknown split") != std::string::npos);
    CHECK(error_of("{not json").find("invalid JSON") != std::string::npos);
}

TEST_CASE("an empty scenario is allowed") {
    std::istringstream in(R"({"id":"q","scenario":"","question":"x","options":["a","b"],"answer":1,"split":"test"})");
    const auto qs = parse_questions(in);
    REQUIRE(qs.size() == 1);
    CHECK(qs[0].scenario.empty());
    CHECK(qs[0].split == Split::Test);
}

TEST_CASE("questions round trip through JSONL") {
    std::vector<Question> qs{toy::question("a", "", "why \"quoted\"", {"x", "y\ny"}, 1, Split::Dev),
                             toy::question("b", "s\xC3\xA9", "q", {"1", "2", "3"}, 2, Split::Test)};
    const auto path = scratch("questions.jsonl").string();
    save_questions(path, qs);
    CHECK(load_questions(path) == qs);
}

TEST_CASE("corpus keeps ingest order and drops paragraphs with no tokens") {
    const Tokenizer tok = toy::tokenizer();
    std::istringstream in(R"({"id":"p1","text":"cats chase mice"})"
                          "\n"
                          R"({"id":"p2","text":"the, of the!"})"
                          "\n"
                          R"({"id":"p3","text":"owls hunt"})"
                          "\n"
                          R"({"id":"p4","text":"cows"})");
    const auto load = parse_corpus(in, tok);
    REQUIRE(load.paragraphs.size() == 3);
    CHECK(load.dropped == 1);
    CHECK(load.paragraphs[0].id == "p1");
    CHECK(load.paragraphs[1].id == "p3");
    CHECK(load.paragraphs[2].id == "p4");
    CHECK(load.paragraphs[1].tokens == std::vector<std::string>{"owls", "hunt"});

    std::istringstream dup(R"({"id":"p1","text":"a b"})"
                           "\n"
                           R"({"id":"p1","text":"c"})");
    CHECK_THROWS_AS(parse_corpus(dup, tok), DataError);
    CHECK_THROWS_AS(load_corpus(scratch("missing.jsonl").string(), tok), DataError);
}

TEST_CASE("corpus and qrels round trip; unknown paragraph ids are rejected") {
    const Tokenizer tok = toy::tokenizer();
    const auto corpus = toy::paragraphs(tok, {"cats chase mice", "owls hunt", "cows graze"});
    const auto corpus_path = scratch("corpus.jsonl").string();
    save_corpus(corpus_path, corpus);
    const auto loaded = load_corpus(corpus_path, tok);
    REQUIRE(loaded.paragraphs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded.paragraphs[i].id == corpus[i].id);
        CHECK(loaded.paragraphs[i].tokens == corpus[i].tokens);
    }

    const auto qrels_path = scratch("qrels.jsonl").string();
    save_qrels(qrels_path, {{"q1", {"p0", "p2"}}, {"q2", {}}});
    const Qrels qrels = load_qrels(qrels_path, corpus);
    CHECK(qrels.relevant("q1") == std::set<std::string>{"p0", "p2"});
    CHECK(qrels.relevant("unknown").empty());
    CHECK(qrels.access_count() == 2);

    save_qrels(qrels_path, {{"q1", {"p9"}}});
    CHECK_THROWS_AS(load_qrels(qrels_path, corpus), DataError);
}

TEST_CASE("split selection preserves order") {
    std::vector<Question> qs{toy::question("a", "", "q", {"x", "y"}, 0, Split::Dev),
                             toy::question("b", "", "q", {"x", "y"}, 0, Split::Train),
                             toy::question("c", "", "q", {"x", "y"}, 0, Split::Dev)};
    const auto dev = select_split(qs, Split::Dev);
    REQUIRE(dev.size() == 2);
    CHECK(dev[0]->id == "a");
    CHECK(dev[1]->id == "c");
}

TEST_CASE("synthetic generation is deterministic and meets its checks") {
    SynthSpec spec;
    spec.num_questions = 200;
    spec.num_paragraphs = 4000;
    spec.seed = 7;
    Tokenizer tok;
    tok.stopwords = default_stopwords();
    const auto a = generate_synthetic(spec, tok);
    const auto b = generate_synthetic(spec, tok);
    REQUIRE(a.questions.size() == 200);
    CHECK(a.questions == b.questions);
    REQUIRE(a.corpus.size() == b.corpus.size());
    for (std::size_t i = 0; i < a.corpus.size(); ++i) {
        CHECK(a.corpus[i].id == b.corpus[i].id);
        CHECK(a.corpus[i].text == b.corpus[i].text);
    }
    CHECK(a.signal_words == b.signal_words);
    CHECK(a.bm25_miss_rate >= 0.5);

    // Signal-only BM25 puts the annotated paragraph first for every question.
    auto corpus = a.corpus;
    for (auto& p : corpus) p.tokens = tok.tokenize(p.text);
    const auto index = InvertedIndex::build(corpus, tok);
    std::map<std::string, std::string> supporting;
    for (const auto& ann : a.annotations) {
        REQUIRE(ann.relevant_paragraph_ids.size() == 1);
        supporting[ann.question_id] = ann.relevant_paragraph_ids[0];
    }
    for (const auto& q : a.questions) {
        const std::string& signal = a.signal_words.at(q.id);
        CHECK(tok.tokenize(q.scenario).front() == signal);
        const TermId t = index.term_id(signal);
        REQUIRE(t != kAbsentTerm);
        const std::vector<TermId> terms{t};
        const auto top = weighted_topk(index, terms, Vector::Ones(1), 1);
        REQUIRE(top.size() == 1);
        CHECK(index.paragraph_id(top[0].doc) == supporting.at(q.id));
    }
}

TEST_CASE("infeasible synthetic specs are rejected") {
    Tokenizer tok;
    tok.stopwords = default_stopwords();
    SynthSpec small_vocab;
    small_vocab.vocab_size = 50;
    CHECK_THROWS_AS(generate_synthetic(small_vocab, tok), std::invalid_argument);
    SynthSpec reuse;
    reuse.fact_reuse = 300;  // three facts cannot fill four options
    CHECK_THROWS_AS(generate_synthetic(reuse, tok), std::invalid_argument);
    SynthSpec easy;
    easy.easy_fraction = 1.5;
    CHECK_THROWS_AS(generate_synthetic(easy, tok), std::invalid_argument);
    SynthSpec none;
    none.num_questions = 0;
    CHECK_THROWS_AS(generate_synthetic(none, tok), std::invalid_argument);
}
