#pragma once

#include "sqa/index.hpp"
#include "sqa/nn.hpp"

#include <span>
#include <vector>

namespace sqa {

struct RetrieverConfig {
    int weight_hidden = 64;
    int score_hidden = 64;
    int tau = 200;
};

/// Per-word logit: linear -> tanh -> linear.
struct WordWeightingNet {
    Linear hidden;
    Linear out;

    static WordWeightingNet create(ParamStore& params, int dim, int hidden, Rng& rng);
    /// n x d -> n x 1 logits.
    Var logits(Tape& tape, const ParamStore& params, Var words, const Activations& act = {}) const;
};

/// Reads the trimmed score profile (1 x tau) and emits one option score.
struct SpaScoreHead {
    Linear hidden;
    Linear out;
    int tau = 200;

    static SpaScoreHead create(ParamStore& params, int tau, int hidden, Rng& rng);
    Var operator()(Tape& tape, const ParamStore& params, Var profile, const Activations& act = {}) const;
};

/// 1 x n softmax over the word logits. Throws DataError when n = 0.
Var word_weights(Tape& tape, const ParamStore& params, const WordWeightingNet& net, Var words,
                 const Activations& act = {});

/// z = B^T w over the columns of `bow`. Throws std::invalid_argument when
/// the weight vector does not match the number of words.
Vector score_paragraphs(const BowMatrix& bow, const Eigen::Ref<const Vector>& weights);

/// Indices of `scores` sorted by score descending, then doc ascending.
std::vector<int> profile_order(const Eigen::Ref<const RowVector>& scores, std::span<const DocId> docs);

/// The tau largest entries of a 1 x K score row in profile order, zero-padded.
/// The selection is fixed at call time; gradient flows through the chosen
/// entries only.
Var trimmed_profile(Var scores, std::span<const DocId> docs, int tau);

/// s^spa for one option.
Var option_score_sparse(Tape& tape, const ParamStore& params, const SpaScoreHead& head, Var scores,
                        std::span<const DocId> docs, const Activations& act = {});

/// Cross-entropy of the option-score softmax (1 x m) at the gold index.
Var retriever_loss(Var option_scores, int gold);

}  // namespace sqa
