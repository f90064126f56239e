#include "sqa/synthetic.hpp"

#include "sqa/evaluation.hpp"
#include "sqa/index.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sqa {

namespace {

using Rng64 = std::mt19937_64;

std::string numbered(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix, i);
    return buf;
}

int uniform_int(Rng64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<int> sample_without_replacement(Rng64& rng, int population, int count) {
    std::vector<int> pool(static_cast<std::size_t>(population));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(uniform_int(rng, i, population - 1))]);
    pool.resize(static_cast<std::size_t>(count));
    return pool;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

const std::string kQuestionText = "Which option does the scenario support?";

SyntheticDataset generate_once(const SynthSpec& spec) {
    Rng64 rng(spec.seed);
    const int signals = spec.num_signal_words == 0 ? spec.num_questions : spec.num_signal_words;
    const int facts = spec.num_questions / spec.fact_reuse;
    const int noise_pool = spec.vocab_size - signals - facts;
    const int topics = (spec.num_questions + spec.questions_per_topic - 1) / spec.questions_per_topic;

    // Topic vocabularies come first in the noise pool; the rest is filler
    // that only supporting paragraphs use.
    std::vector<std::string> noise(static_cast<std::size_t>(noise_pool));
    for (int i = 0; i < noise_pool; ++i) noise[static_cast<std::size_t>(i)] = numbered("w", i);
    const int filler_begin = topics * spec.topic_words;
    auto topic_word = [&](int topic, int i) { return noise[static_cast<std::size_t>(topic * spec.topic_words + i)]; };
    auto filler_word = [&] { return noise[static_cast<std::size_t>(uniform_int(rng, filler_begin, noise_pool - 1))]; };
    const std::vector<int> signal_ids = sample_without_replacement(rng, signals, spec.num_questions);

    // Each fact is the answer to exactly fact_reuse questions, so every
    // option, right or wrong, names a fact with the same number of
    // supporting paragraphs and fact identity says nothing about the answer.
    std::vector<int> gold_fact(static_cast<std::size_t>(spec.num_questions));
    for (int q = 0; q < spec.num_questions; ++q) gold_fact[static_cast<std::size_t>(q)] = q % facts;
    std::shuffle(gold_fact.begin(), gold_fact.end(), rng);

    SyntheticDataset ds;
    std::vector<std::vector<std::string>> paragraphs;
    std::vector<int> supporting(static_cast<std::size_t>(spec.num_questions));

    for (int q = 0; q < spec.num_questions; ++q) {
        Question question;
        question.id = numbered("q", q);
        question.question = kQuestionText;
        question.split = q % 5 < 3 ? Split::Train : (q % 5 == 3 ? Split::Dev : Split::Test);
        const std::string signal = numbered("sig", signal_ids[static_cast<std::size_t>(q)]);
        const std::string fact = numbered("fact", gold_fact[static_cast<std::size_t>(q)]);
        ds.signal_words[question.id] = signal;

        // A few easy questions carry little topic noise; they let retrieval
        // get started and are the only ones flat weights can solve.
        const bool easy = std::uniform_real_distribution<double>(0, 1)(rng) < spec.easy_fraction;
        const int noise_words = easy ? spec.easy_noise_words : spec.num_noise_words_per_scenario;
        const int topic = q % topics;
        std::vector<std::string> scenario{signal};
        for (int i : sample_without_replacement(rng, spec.topic_words, noise_words))
            scenario.push_back(topic_word(topic, i));
        question.scenario = join(scenario);

        std::vector<std::string> options{fact};
        while (static_cast<int>(options.size()) < spec.num_options) {
            const std::string f = numbered("fact", uniform_int(rng, 0, facts - 1));
            if (std::find(options.begin(), options.end(), f) == options.end()) options.push_back(f);
        }
        std::shuffle(options.begin(), options.end(), rng);
        question.answer = static_cast<int>(std::find(options.begin(), options.end(), fact) - options.begin());
        question.options = std::move(options);

        std::vector<std::string> support{signal};
        for (int r = 0; r < spec.fact_repeats; ++r) support.push_back(fact);
        const int filler = uniform_int(rng, spec.min_filler, spec.max_filler);
        for (int r = 0; r < filler; ++r) support.push_back(filler_word());
        std::shuffle(support.begin(), support.end(), rng);
        supporting[static_cast<std::size_t>(q)] = static_cast<int>(paragraphs.size());
        paragraphs.push_back(std::move(support));
        ds.questions.push_back(std::move(question));
    }

    if (static_cast<int>(paragraphs.size()) > spec.num_paragraphs)
        throw std::invalid_argument("num_paragraphs must be at least num_questions");
    for (int p = 0; static_cast<int>(paragraphs.size()) < spec.num_paragraphs; ++p) {
        const int len = uniform_int(rng, spec.min_paragraph_words, spec.max_paragraph_words);
        std::vector<std::string> words;
        for (int i : sample_without_replacement(rng, spec.topic_words, len)) words.push_back(topic_word(p % topics, i));
        paragraphs.push_back(std::move(words));
    }

    std::vector<int> placement(paragraphs.size());
    std::iota(placement.begin(), placement.end(), 0);
    std::shuffle(placement.begin(), placement.end(), rng);  // placement[slot] = paragraph
    std::vector<int> slot_of(paragraphs.size());
    for (std::size_t s = 0; s < placement.size(); ++s) slot_of[static_cast<std::size_t>(placement[s])] = static_cast<int>(s);
    for (std::size_t s = 0; s < placement.size(); ++s) {
        Paragraph p;
        p.id = numbered("p", static_cast<int>(s));
        p.text = join(paragraphs[static_cast<std::size_t>(placement[s])]);
        ds.corpus.push_back(std::move(p));
    }
    for (int q = 0; q < spec.num_questions; ++q) {
        const int slot = slot_of[static_cast<std::size_t>(supporting[static_cast<std::size_t>(q)])];
        ds.annotations.push_back({ds.questions[static_cast<std::size_t>(q)].id, {ds.corpus[static_cast<std::size_t>(slot)].id}});
    }
    return ds;
}

// Fills bm25_miss_rate; throws if signal-only retrieval ever misses.
void verify(SyntheticDataset& ds, const Tokenizer& tokenizer) {
    std::vector<Paragraph> corpus = ds.corpus;
    for (auto& p : corpus) p.tokens = tokenizer.tokenize(p.text);
    const InvertedIndex index = InvertedIndex::build(corpus, tokenizer);
    std::size_t misses = 0, within = 0;
    for (std::size_t q = 0; q < ds.questions.size(); ++q) {
        const Question& question = ds.questions[q];
        const auto doc = index.doc_id(ds.annotations[q].relevant_paragraph_ids.front());
        const std::vector<std::string> signal{ds.signal_words.at(question.id)};
        const auto by_signal = weighted_topk(index, index.lookup(signal), Vector::Ones(1), 1);
        if (by_signal.empty() || by_signal.front().doc != *doc)
            throw std::runtime_error("signal word of " + question.id + " does not retrieve its paragraph first");
        const auto words = option_query_words(question, question.answer, tokenizer);
        const auto terms = index.lookup(words);
        const Vector w = Vector::Constant(static_cast<Eigen::Index>(terms.size()), 1.0 / static_cast<real>(terms.size()));
        const auto flat = weighted_topk(index, terms, w, static_cast<std::size_t>(ds.profile_depth));
        if (flat.empty() || flat.front().doc != *doc) ++misses;
        if (std::any_of(flat.begin(), flat.end(), [&](const ScoredParagraph& sp) { return sp.doc == *doc; })) ++within;
    }
    ds.bm25_miss_rate = static_cast<double>(misses) / static_cast<double>(ds.questions.size());
    ds.bm25_within_depth = static_cast<double>(within) / static_cast<double>(ds.questions.size());
}

}  // namespace

SyntheticDataset generate_synthetic(const SynthSpec& spec, const Tokenizer& tokenizer) {
    const int signals = spec.num_signal_words == 0 ? spec.num_questions : spec.num_signal_words;
    if (spec.num_questions < 5) throw std::invalid_argument("need at least 5 questions");
    if (spec.num_options < 2) throw std::invalid_argument("need at least 2 options");
    if (spec.num_questions / 5 < spec.num_options) throw std::invalid_argument("too few questions per split for the options");
    if (signals < spec.num_questions) throw std::invalid_argument("each question needs its own signal word");
    if (spec.questions_per_topic < 1 || spec.topic_words < 1) throw std::invalid_argument("bad topic shape");
    if (spec.num_noise_words_per_scenario < 1 || spec.num_noise_words_per_scenario > spec.topic_words)
        throw std::invalid_argument("noise words per scenario must lie in [1, topic_words]");
    if (spec.min_paragraph_words < 1 || spec.max_paragraph_words < spec.min_paragraph_words ||
        spec.max_paragraph_words > spec.topic_words)
        throw std::invalid_argument("bad background paragraph length range");
    if (spec.min_filler < 0 || spec.max_filler < spec.min_filler || spec.fact_repeats < 1)
        throw std::invalid_argument("bad supporting paragraph shape");
    const int topics = (spec.num_questions + spec.questions_per_topic - 1) / spec.questions_per_topic;
    if (spec.fact_reuse < 1 || spec.num_questions / spec.fact_reuse < spec.num_options)
        throw std::invalid_argument("fact_reuse leaves fewer facts than options");
    if (spec.easy_fraction < 0 || spec.easy_fraction > 1 || spec.easy_noise_words < 1 ||
        spec.easy_noise_words > spec.topic_words)
        throw std::invalid_argument("bad easy question shape");
    if (spec.vocab_size - signals - spec.num_questions / spec.fact_reuse < topics * spec.topic_words + 1)
        throw std::invalid_argument("vocab_size too small for the signal, fact, topic and filler words");

    SyntheticDataset ds = generate_once(spec);
    verify(ds, tokenizer);
    if (ds.bm25_miss_rate < 0.5)
        throw std::runtime_error("flat BM25 finds the supporting paragraph first on more than half of the questions");
    return ds;
}

}  // namespace sqa
