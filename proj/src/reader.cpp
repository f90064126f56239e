#include "sqa/reader.hpp"

#include "sqa/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sqa {

namespace {

const char* const kPairNames[kNumSegmentPairs] = {"ps", "pq", "po", "sq", "so", "qo"};

Var segment_or_null(Tape& tape, const ParamStore& params, const FusionParams& fusion, const EncodedSequence& encoded,
                    const SegmentSpan& span) {
    if (span.length > 0) return encoded.segment(span);
    return params.leaf(tape, fusion.null_segment);
}

}  // namespace

DenseScoreHead DenseScoreHead::create(ParamStore& params, int dim, Rng& rng) {
    return {Linear::create(params, "reader.dense_score", dim, 1, 0.0, rng)};
}

FusionParams FusionParams::create(ParamStore& params, int dim, const ReaderConfig& config, Rng& rng) {
    FusionParams f;
    const int df = config.fusion_dim;
    const int fused = kNumSegmentPairs * df;
    for (int p = 0; p < kNumSegmentPairs; ++p)
        f.pairs[static_cast<std::size_t>(p)] = Linear::create(params, std::string("reader.pair.") + kPairNames[p],
                                                              2 * dim, df, 1.0 / std::sqrt(real(2 * dim)), rng);
    f.attention_hidden = Linear::create(params, "reader.pool.hidden", fused, config.attention_hidden,
                                        1.0 / std::sqrt(real(fused)), rng);
    f.attention_out = Linear::create(params, "reader.pool.out", config.attention_hidden, 1,
                                     1.0 / std::sqrt(real(config.attention_hidden)), rng);
    f.fused_score = Linear::create(params, "reader.fused_score", fused, 1, 0.0, rng);
    f.null_segment = params.add("reader.null_segment", random_normal(1, dim, 1.0, rng));
    f.null_fused = params.add("reader.null_fused", random_normal(1, fused, 0.1, rng));
    return f;
}

Var rescore(Tape& tape, const ParamStore& params, const DenseScoreHead& head, Var cls_rows) {
    return head.linear(tape, params, cls_rows);
}

std::vector<int> select_fusion(const Eigen::Ref<const Vector>& dense_scores, std::span<const DocId> docs,
                               int k_fusion) {
    if (static_cast<std::size_t>(dense_scores.size()) != docs.size())
        throw std::invalid_argument("dense scores and docs differ in length");
    std::vector<int> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return ranks_before({docs[static_cast<std::size_t>(a)], dense_scores(a)},
                            {docs[static_cast<std::size_t>(b)], dense_scores(b)});
    });
    order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(k_fusion, 0))));
    return order;
}

std::pair<Var, Var> dual_attention(Var x, Var y) {
    if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("dual attention needs non-empty inputs");
    const real inv_sqrt = 1.0 / std::sqrt(static_cast<real>(x.cols()));
    Var a = ad::scale(ad::matmul_nt(x, y), inv_sqrt);
    Var x_hat = ad::add(x, ad::matmul(ad::softmax_rows(a), y));
    Var y_hat = ad::add(y, ad::matmul(ad::softmax_rows(ad::transpose(a)), x));
    return {x_hat, y_hat};
}

Var fuse_intra(Tape& tape, const ParamStore& params, const FusionParams& fusion, const EncodedSequence& encoded,
               const Activations& act) {
    const Var segs[4] = {
        segment_or_null(tape, params, fusion, encoded, encoded.paragraph),
        segment_or_null(tape, params, fusion, encoded, encoded.scenario),
        segment_or_null(tape, params, fusion, encoded, encoded.question),
        segment_or_null(tape, params, fusion, encoded, encoded.option),
    };
    static constexpr int kPairs[kNumSegmentPairs][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    std::vector<Var> parts;
    parts.reserve(kNumSegmentPairs);
    for (int p = 0; p < kNumSegmentPairs; ++p) {
        auto [x_hat, y_hat] = dual_attention(segs[kPairs[p][0]], segs[kPairs[p][1]]);
        Var pooled = ad::concat_cols(std::vector<Var>{ad::max_pool_rows(x_hat), ad::max_pool_rows(y_hat)});
        parts.push_back(act.relu(fusion.pairs[static_cast<std::size_t>(p)](tape, params, pooled)));
    }
    return ad::concat_cols(parts);
}

InterFusion fuse_inter(Tape& tape, const ParamStore& params, const FusionParams& fusion, Var per_paragraph,
                       const Activations& act) {
    if (per_paragraph.rows() == 0) throw std::invalid_argument("fuse_inter needs at least one paragraph");
    Var logits = act.tanh(fusion.attention_out(tape, params, act.tanh(fusion.attention_hidden(tape, params, per_paragraph))));
    Var weights = ad::softmax_rows(ad::transpose(logits));
    return {ad::matmul(weights, per_paragraph), weights};
}

ReaderScores option_scores_reader(Tape& tape, const ParamStore& params, const FusionParams& fusion, Var fused,
                                  Var dense_scores) {
    if (!fused.valid()) fused = params.leaf(tape, fusion.null_fused);
    ReaderScores s;
    s.fused = fusion.fused_score(tape, params, fused);
    s.dense = dense_scores.valid() && dense_scores.rows() > 0 ? ad::sum(dense_scores) : tape.constant(Matrix::Zero(1, 1));
    return s;
}

Var reader_loss(Var fused_scores, Var dense_scores, int gold) {
    return ad::add(ad::cross_entropy(fused_scores, gold), ad::cross_entropy(dense_scores, gold));
}

}  // namespace sqa
