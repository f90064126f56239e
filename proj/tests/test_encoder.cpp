#include "toy.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace sqa;

namespace {

std::vector<std::string> words(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

Vocabulary vocab_of(std::initializer_list<std::vector<std::string>> lists) {
    Vocabulary v;
    for (const auto& l : lists)
        for (const auto& w : l) v.add(w);
    return v;
}

struct Fixture {
    ParamStore params;
    Encoder encoder;
    Vocabulary vocab;

    Fixture(Vocabulary v, EncoderConfig config, std::uint64_t seed = 1) : vocab(std::move(v)) {
        Rng rng(seed);
        encoder = Encoder::create(params, vocab.size(), config, rng);
    }

    Matrix encode(const SequenceLayout& layout) const {
        Tape tape;
        return encoder.encode(tape, params, layout).states.value();
    }
};

EncoderConfig small(bool mixing = true, int max_len = 32) {
    EncoderConfig c;
    c.dim = 8;
    c.heads = 2;
    c.max_seq_len = max_len;
    c.mixing = mixing;
    return c;
}

}  // namespace

TEST_CASE("vocabulary reserves the special ids and round trips") {
    const Vocabulary empty;
    CHECK(empty.size() == 4);
    CHECK(empty.token(Vocabulary::kPad) == "[PAD]");
    CHECK(empty.token(Vocabulary::kUnk) == "[UNK]");
    CHECK(empty.token(Vocabulary::kCls) == "[CLS]");
    CHECK(empty.token(Vocabulary::kSep) == "[SEP]");
    CHECK(empty.id("anything") == Vocabulary::kUnk);

    const auto world = toy::animals();
    const Vocabulary v = Vocabulary::build(world.questions, world.corpus, world.tok);
    CHECK(v.id("farmer") > Vocabulary::kSep);  // train scenario word
    CHECK(v.id("culprit") == Vocabulary::kUnk);  // dev-only word stays out
    CHECK(v.id("foxes") != Vocabulary::kUnk);  // dev option also in the corpus

    const auto dir = std::filesystem::temp_directory_path() / "sqa_test_encoder";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "vocab.txt").string();
    v.save(path);
    CHECK(Vocabulary::load(path) == v);
    std::ofstream(path) << "[PAD]\n[CLS]\n[UNK]\n[SEP]\nx\n";
    CHECK_THROWS_AS(Vocabulary::load(path), FormatError);
}

TEST_CASE("option layout with an empty scenario") {
    const Vocabulary v = vocab_of({{"why", "grow", "rice"}});
    const OptionText text{{}, {"why", "grow"}, {"rice"}};
    const SequenceLayout l = layout_option(v, text, 32);
    CHECK(l.tokens == std::vector<std::string>{"[CLS]", "[SEP]", "why", "grow", "[SEP]", "rice", "[SEP]"});
    CHECK(l.scenario.length == 0);
    CHECK(std::count(l.segments.begin(), l.segments.end(), Segment::Scenario) == 0);
    CHECK(l.ids[0] == Vocabulary::kCls);
    CHECK(l.question.begin == 2);
    CHECK(l.option.begin == 5);
    CHECK_THROWS_AS(layout_option(v, {{"a"}, {"b"}, {}}, 32), DataError);
}

TEST_CASE("over-long input is cut in the documented order") {
    const auto s = words("s", 6), q = words("q", 4), o = words("o", 4), p = words("p", 10);
    const Vocabulary v = vocab_of({s, q, o, p});
    const OptionText text{s, q, o};

    // 4 specials + 14 tokens; a budget of 10 removes 4 scenario tokens from the front.
    SequenceLayout l = layout_option(v, text, 14);
    CHECK(l.length() == 14);
    CHECK(l.scenario.length == 2);
    CHECK(l.tokens[1] == "s4");
    CHECK(l.question.length == 4);
    // Budget 5: scenario gone, two question tokens from the front, option intact.
    l = layout_option(v, text, 9);
    CHECK(l.scenario.length == 0);
    CHECK(l.question.length == 1);
    CHECK(l.tokens[2] == "q3");
    CHECK(l.option.length == 4);
    // Budget 2: the option loses its tail.
    l = layout_option(v, text, 6);
    CHECK(l.option.length == 2);
    CHECK(l.tokens[l.option.begin] == "o0");
    CHECK(l.tokens[l.option.begin + 1] == "o1");

    // The paragraph tail goes before anything else.
    l = layout_with_paragraph(v, p, text, 5 + 14 + 3);
    CHECK(l.paragraph.length == 3);
    CHECK(l.tokens[1] == "p0");
    CHECK(l.tokens[3] == "p2");
    CHECK(l.scenario.length == 6);
    for (int i = 0; i < l.length(); ++i)
        CHECK((l.segments[static_cast<std::size_t>(i)] == Segment::Paragraph) ==
              (i >= l.paragraph.begin && i < l.paragraph.begin + l.paragraph.length));
    CHECK(std::count(l.ids.begin(), l.ids.end(), Vocabulary::kCls) == 1);
}

TEST_CASE("enriched options list unique words with in-bounds positions") {
    const Vocabulary v = vocab_of({{"rain", "river", "flood", "delta", "a1"}});
    const OptionText text{{"rain", "river", "rain"}, {"flood"}, {"river", "delta"}};
    const SequenceLayout l = layout_option(v, text, 32);
    const EnrichedOption e = enrich("q7", 2, l);
    CHECK(e.question_id == "q7");
    CHECK(e.option_index == 2);
    CHECK(e.unique_words == std::vector<std::string>{"rain", "river", "flood", "delta"});
    CHECK(e.word_positions[0] == std::vector<int>{1, 3});
    CHECK(e.word_positions[1] == std::vector<int>{2, 7});
    CHECK(e.text == "rain river rain flood river delta");
    for (const auto& ps : e.word_positions) {
        CHECK_FALSE(ps.empty());
        for (int p : ps) {
            CHECK(p > 0);
            CHECK(p < l.length());
        }
    }
    // Truncation removes "rain" entirely and one "river" occurrence.
    const EnrichedOption cut = enrich("q7", 2, layout_option(v, text, 7));
    CHECK(cut.unique_words == std::vector<std::string>{"flood", "river", "delta"});
    CHECK(cut.word_positions[1].size() == 1);
}

TEST_CASE("encoding is deterministic and shaped T x d") {
    const Vocabulary v = vocab_of({{"a1", "b1", "c1"}});
    Fixture f(v, small());
    const SequenceLayout l = layout_option(v, {{"a1"}, {"b1"}, {"c1", "a1"}}, 32);
    const Matrix x = f.encode(l);
    CHECK(x.rows() == l.length());
    CHECK(x.cols() == 8);
    CHECK(x == f.encode(l));
    CHECK(x.allFinite());
}

TEST_CASE("without mixing an embedding row only moves its own positions") {
    const Vocabulary v = vocab_of({{"a1", "b1", "c1"}});
    Fixture f(v, small(false));
    const SequenceLayout l = layout_option(v, {{"a1", "c1"}, {"b1"}, {"c1", "a1", "b1"}}, 32);
    const Matrix before = f.encode(l);
    f.params[f.encoder.token_embedding].value.row(v.id("c1")).array() += 0.5;
    const Matrix after = f.encode(l);
    for (int i = 0; i < l.length(); ++i) {
        const bool own = l.tokens[static_cast<std::size_t>(i)] == "c1";
        CHECK((before.row(i) != after.row(i)) == own);
    }

    // With mixing every position attends to the changed token.
    Fixture g(v, small(true));
    const Matrix mb = g.encode(l);
    g.params[g.encoder.token_embedding].value.row(v.id("c1")).array() += 0.5;
    const Matrix ma = g.encode(l);
    for (int i = 0; i < l.length(); ++i) CHECK(mb.row(i) != ma.row(i));
}

TEST_CASE("word pooling takes the entrywise max over occurrences") {
    const Vocabulary v = vocab_of({{"a1", "b1", "c1"}});
    Fixture f(v, small());
    const SequenceLayout l = layout_option(v, {{"a1", "b1"}, {"a1"}, {"c1", "a1"}}, 32);
    EnrichedOption e = enrich("q", 0, l);
    Tape tape;
    const EncodedSequence enc = f.encoder.encode(tape, f.params, l);
    const Matrix states = enc.states.value();
    const Matrix h = pool_unique_words(enc, e).value();
    REQUIRE(h.rows() == e.num_words());
    for (int j = 0; j < e.num_words(); ++j) {
        const auto& ps = e.word_positions[static_cast<std::size_t>(j)];
        RowVector expected = states.row(ps[0]);
        for (int p : ps) expected = expected.cwiseMax(states.row(p));
        CHECK(h.row(j) == expected);
        if (ps.size() == 1) CHECK(h.row(j) == states.row(ps[0]));
    }
    CHECK(e.word_positions[0].size() == 3);
    EnrichedOption reversed = e;
    for (auto& ps : reversed.word_positions) std::reverse(ps.begin(), ps.end());
    std::rotate(reversed.word_positions[0].begin(), reversed.word_positions[0].begin() + 1, reversed.word_positions[0].end());
    CHECK(pool_unique_words(enc, reversed).value() == h);
}

TEST_CASE("different paragraphs give different CLS vectors") {
    const auto p = words("p", 20);
    const Vocabulary v = vocab_of({p, {"s1", "q1", "o1"}});
    const OptionText text{{"s1"}, {"q1"}, {"o1"}};
    std::mt19937_64 gen(3);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Fixture f(v, small(true, 48), seed);
        std::vector<std::string> a, b;
        for (int i = 0; i < 5; ++i) {
            a.push_back(p[std::uniform_int_distribution<std::size_t>(0, 19)(gen)]);
            b.push_back(p[std::uniform_int_distribution<std::size_t>(0, 19)(gen)]);
        }
        if (a == b) continue;
        const Matrix ca = f.encode(layout_with_paragraph(v, a, text, 48)).row(0);
        const Matrix cb = f.encode(layout_with_paragraph(v, b, text, 48)).row(0);
        CHECK(ca != cb);
    }
}

TEST_CASE("encoder gradients of a linear probe match finite differences") {
    const Vocabulary v = vocab_of({{"a1", "b1", "c1", "d1"}});
    Fixture f(v, small(true, 16), 5);
    const SequenceLayout l = layout_with_paragraph(v, {"d1", "a1"}, {{"a1"}, {"b1"}, {"c1", "a1"}}, 16);
    Rng rng(2);
    const Matrix probe = random_normal(l.length(), 8, 1.0, rng);

    // sum_ij S_ij P_ij, one row dot product at a time.
    auto probe_loss = [&](Tape& tape) {
        Var states = f.encoder.encode(tape, f.params, l).states;
        std::vector<Var> dots;
        for (int i = 0; i < l.length(); ++i)
            dots.push_back(ad::matmul_nt(ad::row_block(states, i, 1), tape.constant(probe.row(i))));
        return ad::sum(ad::concat_rows(dots));
    };
    Tape tape;
    Var loss = probe_loss(tape);
    Gradients grads = f.params.zero_gradients();
    tape.backward(loss, grads);

    const double h = 1e-5;
    for (int slot : {f.encoder.token_embedding, f.encoder.position_embedding, f.encoder.query, f.encoder.key,
                     f.encoder.value}) {
        Matrix& value = f.params[slot].value;
        Matrix numeric(value.rows(), value.cols());
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double keep = value.data()[i];
            value.data()[i] = keep + h;
            Tape up;
            const double fu = probe_loss(up).scalar();
            value.data()[i] = keep - h;
            Tape down;
            const double fd = probe_loss(down).scalar();
            value.data()[i] = keep;
            numeric.data()[i] = (fu - fd) / (2 * h);
        }
        const Matrix& analytic = grads[static_cast<std::size_t>(slot)];
        const double scale = std::max(analytic.norm(), numeric.norm());
        INFO(f.params[slot].name);
        REQUIRE(scale > 0);
        CHECK((analytic - numeric).norm() / scale < 1e-4);
    }
}

TEST_CASE("retriever and reader share one encoder") {
    auto world = toy::animals();
    Model model = world.model(toy::small_config());
    toy::jitter(model);
    const auto pq = world.prepare(model, 0);
    auto run = [&] {
        Tape tape;
        return forward(tape, model, pq, *world.kb, nullptr, false).options;
    };
    const auto before = run();
    model.params[model.encoder.value].value.array() += 0.05;
    const auto after = run();
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].weights != after[i].weights);  // option sequence path
        CHECK(before[i].dense != after[i].dense);      // paragraph sequence path
    }
}
