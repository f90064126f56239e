#pragma once

#include "sqa/dataset.hpp"
#include "sqa/index.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace sqa {

/// Raw option scores of one question, one entry per option.
struct ScoreTriple {
    RowVector spa, den, fus;
};

/// Weights of the normalized score vectors in the final score.
struct Mixture {
    real alpha = 1.0 / 3;
    real beta = 1.0 / 3;
    real gamma = 1.0 / 3;
};

RowVector softmax(const Eigen::Ref<const RowVector>& scores);

/// s = alpha softmax(spa) + beta softmax(den) + gamma softmax(fus).
RowVector final_scores(const ScoreTriple& scores, const Mixture& mixture);

/// Argmax of the final scores; ties go to the lowest option index.
int predict(const ScoreTriple& scores, const Mixture& mixture);

real accuracy(std::span<const int> predictions, std::span<const int> gold);

/// Grid search over {0, 0.05, ..., 1}^3 for the best accuracy; ties prefer
/// larger gamma, then larger beta, then larger alpha.
Mixture tune_mixture(std::span<const ScoreTriple> scores, std::span<const int> gold);

struct RankedParagraph {
    std::string paragraph_id;
    real score = 0;
};

/// One ranked list per question.
struct RankedList {
    std::string question_id;
    std::vector<RankedParagraph> ranked;
};

using RetrievalRun = std::vector<RankedList>;

/// Merges per-option lists: each paragraph keeps its best score, ordered by
/// score descending then doc id ascending.
RankedList pool_option_lists(const std::string& question_id,
                             const std::vector<std::vector<ScoredParagraph>>& per_option, const InvertedIndex& index);

/// Average precision over the top K, normalized by the number of relevant
/// paragraphs.
real average_precision_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k);
/// Binary gains with 1/log2(rank + 1) discount; the ideal list holds
/// min(|relevant|, K) hits.
real ndcg_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k);
real hit_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k);

struct RetrievalMetrics {
    std::map<int, real> map, ndcg, hit_rate;
    std::size_t evaluated = 0;
    /// Questions in the run without any relevant annotation.
    std::size_t without_relevant = 0;
};

/// Means over questions that have at least one relevant paragraph.
RetrievalMetrics retrieval_metrics(const RetrievalRun& run, const Qrels& qrels, std::vector<int> cutoffs = {2, 10});

/// Unique non-stopword words of scenario, question and one option.
std::vector<std::string> option_query_words(const Question& question, int option, const Tokenizer& tokenizer);

/// Flat BM25 (uniform word weights) per option, pooled per question.
RetrievalRun baseline_bm25_run(const InvertedIndex& index, std::span<const Question* const> questions, std::size_t k);

/// Option score = BM25 score of its single best paragraph; argmax with ties
/// to the lowest index.
int baseline_ir_solver(const InvertedIndex& index, const Question& question);

}  // namespace sqa
