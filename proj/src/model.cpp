#include "sqa/model.hpp"

#include <stdexcept>

namespace sqa {

void ModelConfig::validate() const {
    if (encoder.dim <= 0 || encoder.heads <= 0 || encoder.dim % encoder.heads != 0)
        throw std::invalid_argument("dim must be a positive multiple of heads");
    if (encoder.max_seq_len < 8) throw std::invalid_argument("max_seq_len must be at least 8");
    if (k < 0 || k_fusion < 1 || k_fusion > std::max(k, 1)) throw std::invalid_argument("need 1 <= k' <= k");
    if (retriever.tau < 1) throw std::invalid_argument("tau must be at least 1");
    if (retriever.weight_hidden < 1 || retriever.score_hidden < 1 || reader.fusion_dim < 1 ||
        reader.attention_hidden < 1)
        throw std::invalid_argument("layer widths must be positive");
}

KnowledgeBase::KnowledgeBase(const InvertedIndex& index, const std::vector<Paragraph>& paragraphs)
    : index_(&index), paragraphs_(&paragraphs) {
    if (index.num_docs() != paragraphs.size())
        throw DataError("index holds " + std::to_string(index.num_docs()) + " paragraphs but the corpus has " +
                        std::to_string(paragraphs.size()));
    for (DocId d = 0; d < paragraphs.size(); ++d)
        if (index.paragraph_id(d) != paragraphs[d].id)
            throw DataError("index and corpus disagree at paragraph " + paragraphs[d].id);
}

Model Model::create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    m.vocab = std::move(vocab);
    Rng rng(seed);
    const int d = config.encoder.dim;
    m.encoder = Encoder::create(m.params, m.vocab.size(), config.encoder, rng);
    m.weighting = WordWeightingNet::create(m.params, d, config.retriever.weight_hidden, rng);
    m.spa_head = SpaScoreHead::create(m.params, config.retriever.tau, config.retriever.score_hidden, rng);
    m.dense_head = DenseScoreHead::create(m.params, d, rng);
    m.fusion = FusionParams::create(m.params, d, config.reader, rng);
    return m;
}

PreparedQuestion prepare_question(const Question& question, const Tokenizer& tokenizer, const Model& model,
                                  const InvertedIndex& index) {
    PreparedQuestion pq;
    pq.question = &question;
    const auto scenario = tokenizer.tokenize(question.scenario);
    const auto query = tokenizer.tokenize(question.question);
    for (int i = 0; i < question.num_options(); ++i) {
        PreparedOption po;
        po.text = {scenario, query, tokenizer.tokenize(question.options[static_cast<std::size_t>(i)])};
        if (po.text.option.empty())
            throw DataError("question \"" + question.id + "\": option " + std::to_string(i) +
                            " has no tokens after filtering");
        po.layout = layout_option(model.vocab, po.text, model.config.encoder.max_seq_len);
        po.enriched = enrich(question.id, i, po.layout);
        po.terms = index.lookup(po.enriched.unique_words);
        pq.options.push_back(std::move(po));
    }
    return pq;
}

ForwardResult forward(Tape& tape, const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                      const RetrievalCache* cache, bool with_loss) {
    const ParamStore& params = model.params;
    const Activations& act = model.activations;
    const InvertedIndex& index = kb.index();
    const auto m = question.options.size();
    if (cache && cache->size() != m) throw std::invalid_argument("retrieval cache does not match the question");

    ForwardResult result;
    result.options.resize(m);
    std::vector<Var> spa(m), den(m), fus(m);

    for (std::size_t i = 0; i < m; ++i) {
        const PreparedOption& opt = question.options[i];
        OptionTrace& trace = result.options[i];
        const auto n = static_cast<Eigen::Index>(opt.terms.size());

        Var weights;
        if (model.config.uniform_weights) {
            weights = tape.constant(Matrix::Constant(1, n, 1.0 / static_cast<real>(n)));
        } else {
            EncodedSequence enc = model.encoder.encode(tape, params, opt.layout);
            weights = word_weights(tape, params, model.weighting, pool_unique_words(enc, opt.enriched), act);
        }
        trace.weights = weights.value().row(0).transpose();

        if (cache) {
            trace.retrieved = (*cache)[i];
        } else {
            for (const auto& sp : weighted_topk(index, opt.terms, trace.weights,
                                                static_cast<std::size_t>(model.retrieval_depth())))
                trace.retrieved.push_back(sp.doc);
        }

        const auto depth = static_cast<Eigen::Index>(trace.retrieved.size());
        Matrix bow = Matrix::Zero(n, depth);
        for (Eigen::Index j = 0; j < n; ++j) {
            const TermId t = opt.terms[static_cast<std::size_t>(j)];
            if (t == kAbsentTerm) continue;
            for (Eigen::Index l = 0; l < depth; ++l) bow(j, l) = index.bm25(t, trace.retrieved[static_cast<std::size_t>(l)]);
        }
        Var sparse = ad::matmul(weights, tape.constant(std::move(bow)));
        spa[i] = option_score_sparse(tape, params, model.spa_head, sparse, trace.retrieved, act);

        // P^top keeps the retrieval order; cached lists are reused as ranked.
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.config.k), trace.retrieved.size());
        trace.top.assign(trace.retrieved.begin(), trace.retrieved.begin() + static_cast<std::ptrdiff_t>(k));
        trace.sparse_top = sparse.value().row(0).head(static_cast<Eigen::Index>(k)).transpose();

        Var fused_vec, dense_scores;
        if (k > 0) {
            std::vector<EncodedSequence> encoded;
            std::vector<Var> cls;
            encoded.reserve(k);
            cls.reserve(k);
            for (DocId d : trace.top) {
                SequenceLayout layout =
                    layout_with_paragraph(model.vocab, kb.paragraph(d).tokens, opt.text, model.config.encoder.max_seq_len);
                encoded.push_back(model.encoder.encode(tape, params, layout));
                cls.push_back(encoded.back().cls());
            }
            dense_scores = rescore(tape, params, model.dense_head, ad::concat_rows(cls));
            trace.dense = dense_scores.value().col(0);
            const std::vector<int> chosen = select_fusion(trace.dense, trace.top, model.config.k_fusion);
            std::vector<Var> rows;
            rows.reserve(chosen.size());
            for (int c : chosen) {
                trace.fused.push_back(trace.top[static_cast<std::size_t>(c)]);
                rows.push_back(fuse_intra(tape, params, model.fusion, encoded[static_cast<std::size_t>(c)], act));
            }
            InterFusion inter = fuse_inter(tape, params, model.fusion, ad::concat_rows(rows), act);
            trace.pool_weights = inter.weights.value().row(0).transpose();
            fused_vec = inter.fused;
        }
        ReaderScores rs = option_scores_reader(tape, params, model.fusion, fused_vec, dense_scores);
        den[i] = rs.dense;
        fus[i] = rs.fused;
        trace.s_spa = spa[i].scalar();
        trace.s_den = den[i].scalar();
        trace.s_fus = fus[i].scalar();
    }

    result.s_spa = ad::concat_cols(spa);
    result.s_den = ad::concat_cols(den);
    result.s_fus = ad::concat_cols(fus);
    if (with_loss) {
        const int gold = question.question->answer;
        result.retriever_loss = retriever_loss(result.s_spa, gold);
        result.reader_loss = reader_loss(result.s_fus, result.s_den, gold);
        result.loss = ad::add(result.retriever_loss, result.reader_loss);
    }
    return result;
}

RetrievalCache retrieval_of(const ForwardResult& result) {
    RetrievalCache cache;
    cache.reserve(result.options.size());
    for (const auto& o : result.options) cache.push_back(o.retrieved);
    return cache;
}

}  // namespace sqa
