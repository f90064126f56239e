#pragma once

#include "sqa/encoder.hpp"
#include "sqa/nn.hpp"

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace sqa {

struct ReaderConfig {
    int fusion_dim = 64;
    int attention_hidden = 64;
};

/// Segment pairs in the order their vectors are concatenated.
enum class SegmentPair { PS, PQ, PO, SQ, SO, QO };
inline constexpr int kNumSegmentPairs = 6;

/// z^den for one paragraph-conditioned sequence: a single linear layer on
/// the CLS vector.
struct DenseScoreHead {
    Linear linear;

    static DenseScoreHead create(ParamStore& params, int dim, Rng& rng);
};

struct FusionParams {
    std::array<Linear, kNumSegmentPairs> pairs;
    Linear attention_hidden;
    Linear attention_out;
    Linear fused_score;
    int null_segment = -1;  // 1 x d, stands in for an empty segment
    int null_fused = -1;    // 1 x 6 d_f, stands in when nothing was retrieved

    static FusionParams create(ParamStore& params, int dim, const ReaderConfig& config, Rng& rng);
    int fused_dim(const ParamStore& params) const { return fused_score.in_features(params); }
};

/// k x d CLS matrix -> k x 1 paragraph scores.
Var rescore(Tape& tape, const ParamStore& params, const DenseScoreHead& head, Var cls_rows);

/// Positions (into the P^top list) of the k' best paragraphs by z^den, best
/// first; ties go to the smaller doc id.
std::vector<int> select_fusion(const Eigen::Ref<const Vector>& dense_scores, std::span<const DocId> docs,
                               int k_fusion);

/// Scaled bidirectional cross-attention with residuals:
///   A = X Y^T / sqrt(d), X' = X + softmax_rows(A) Y, Y' = Y + softmax_rows(A^T) X.
std::pair<Var, Var> dual_attention(Var x, Var y);

/// Six pair vectors of one paragraph-conditioned sequence, 1 x 6 d_f.
Var fuse_intra(Tape& tape, const ParamStore& params, const FusionParams& fusion, const EncodedSequence& encoded,
               const Activations& act = {});

struct InterFusion {
    Var fused;    // 1 x 6 d_f
    Var weights;  // 1 x k'
};

/// Self-attention pooling over the k' rows of F.
InterFusion fuse_inter(Tape& tape, const ParamStore& params, const FusionParams& fusion, Var per_paragraph,
                       const Activations& act = {});

struct ReaderScores {
    Var fused;  // s^fus, 1 x 1
    Var dense;  // s^den, 1 x 1
};

/// s^fus from the fused vector and s^den as the plain sum of z^den. An
/// invalid `fused` selects the null fused vector; an invalid `dense_scores`
/// (nothing retrieved) gives s^den = 0.
ReaderScores option_scores_reader(Tape& tape, const ParamStore& params, const FusionParams& fusion, Var fused,
                                  Var dense_scores);

/// CE(s^fus) + CE(s^den), both rows 1 x m.
Var reader_loss(Var fused_scores, Var dense_scores, int gold);

}  // namespace sqa
