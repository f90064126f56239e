#pragma once

#include "sqa/dataset.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sqa {

/// Controlled world for implicit supervision. Every question has one signal
/// word (first scenario word) that occurs only in its supporting paragraph,
/// next to the fact that names the correct option. The rest of the scenario
/// is drawn from a topic whose words fill hundreds of background paragraphs,
/// so flat BM25 over the whole option buries the supporting paragraph.
struct SynthSpec {
    int num_questions = 1000;
    /// Total generated words: signal words, facts and the shared topic and
    /// filler pool.
    int vocab_size = 4000;
    int num_noise_words_per_scenario = 14;
    /// 0 means one per question; each signal word is used by one question.
    int num_signal_words = 0;
    int num_paragraphs = 20000;
    std::uint64_t seed = 7;

    int num_options = 4;
    int questions_per_topic = 20;
    int topic_words = 20;
    int min_paragraph_words = 6;  // background paragraph length range
    int max_paragraph_words = 10;
    int min_filler = 2;  // extra words in a supporting paragraph
    int max_filler = 6;
    int fact_repeats = 3;  // term frequency of a fact in its paragraph
    int fact_reuse = 2;    // questions answered by each fact
    /// Share of questions with only easy_noise_words topic words.
    double easy_fraction = 0.1;
    int easy_noise_words = 3;
};

struct SyntheticDataset {
    std::vector<Question> questions;
    std::vector<Paragraph> corpus;  // text only; tokens are filled at load
    std::vector<RelevanceAnnotation> annotations;
    std::map<std::string, std::string> signal_words;  // question id -> signal
    /// Share of questions whose supporting paragraph is not flat BM25's top-1
    /// for the gold option.
    double bm25_miss_rate = 0;
    /// Share of questions whose supporting paragraph is within flat BM25's
    /// top `profile_depth` for the gold option.
    double bm25_within_depth = 0;
    int profile_depth = 200;
};

/// Deterministic in `spec`. Throws std::invalid_argument for infeasible
/// specs and std::runtime_error if the verification checks cannot be met.
SyntheticDataset generate_synthetic(const SynthSpec& spec, const Tokenizer& tokenizer);

}  // namespace sqa
