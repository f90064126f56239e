#include "sqa/retriever.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sqa {

WordWeightingNet WordWeightingNet::create(ParamStore& params, int dim, int hidden, Rng& rng) {
    WordWeightingNet net;
    net.hidden = Linear::create(params, "retriever.weighting.hidden", dim, hidden, 1.0 / std::sqrt(real(dim)), rng);
    // A zero output layer starts every option at uniform word weights.
    net.out = Linear::create(params, "retriever.weighting.out", hidden, 1, 0.0, rng);
    return net;
}

Var WordWeightingNet::logits(Tape& tape, const ParamStore& params, Var words, const Activations& act) const {
    return out(tape, params, act.tanh(hidden(tape, params, words)));
}

SpaScoreHead SpaScoreHead::create(ParamStore& params, int tau, int hidden, Rng& rng) {
    if (tau < 1) throw std::invalid_argument("tau must be at least 1");
    SpaScoreHead head;
    head.tau = tau;
    head.hidden = Linear::create(params, "retriever.score.hidden", tau, hidden, 1.0 / std::sqrt(real(tau)), rng);
    head.out = Linear::create(params, "retriever.score.out", hidden, 1, 0.0, rng);
    return head;
}

Var SpaScoreHead::operator()(Tape& tape, const ParamStore& params, Var profile, const Activations& act) const {
    return out(tape, params, act.tanh(hidden(tape, params, profile)));
}

Var word_weights(Tape& tape, const ParamStore& params, const WordWeightingNet& net, Var words,
                 const Activations& act) {
    if (words.rows() == 0) throw DataError("option has no unique words");
    return ad::softmax_rows(ad::transpose(net.logits(tape, params, words, act)));
}

Vector score_paragraphs(const BowMatrix& bow, const Eigen::Ref<const Vector>& weights) {
    if (weights.size() != bow.rows()) throw std::invalid_argument("weight vector does not match the BoW rows");
    return bow.entries.transpose() * weights;
}

std::vector<int> profile_order(const Eigen::Ref<const RowVector>& scores, std::span<const DocId> docs) {
    if (static_cast<std::size_t>(scores.size()) != docs.size())
        throw std::invalid_argument("scores and docs differ in length");
    std::vector<int> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return ranks_before({docs[static_cast<std::size_t>(a)], scores(a)}, {docs[static_cast<std::size_t>(b)], scores(b)});
    });
    return order;
}

Var trimmed_profile(Var scores, std::span<const DocId> docs, int tau) {
    if (tau < 1) throw std::invalid_argument("tau must be at least 1");
    std::vector<int> order = profile_order(scores.value().row(0), docs);
    return ad::select_pad(scores, std::move(order), tau);
}

Var option_score_sparse(Tape& tape, const ParamStore& params, const SpaScoreHead& head, Var scores,
                        std::span<const DocId> docs, const Activations& act) {
    return head(tape, params, trimmed_profile(scores, docs, head.tau), act);
}

Var retriever_loss(Var option_scores, int gold) { return ad::cross_entropy(option_scores, gold); }

}  // namespace sqa
