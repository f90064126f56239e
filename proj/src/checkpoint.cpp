#include "sqa/checkpoint.hpp"

#include "binary_io.hpp"

#include <fstream>

namespace sqa {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'A', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kMaxTensors = 1u << 20;
constexpr std::uint64_t kMaxElements = 1ull << 32;

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    detail::BinaryWriter w(out);
    w.put_bytes(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointFormatVersion);
    w.put_string(checkpoint.metadata.dump());
    w.put<std::uint64_t>(checkpoint.tensors.size());
    for (const auto& t : checkpoint.tensors) {
        w.put_string(t.name);
        w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.rows()));
        w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.cols()));
        for (Eigen::Index r = 0; r < t.value.rows(); ++r)
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) w.put<double>(t.value(r, c));
    }
    if (!w.ok()) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::BinaryReader r(in, path);
    char magic[sizeof kMagic];
    r.get_bytes(magic, sizeof magic);
    if (!std::equal(magic, magic + sizeof magic, kMagic)) throw FormatError(path + ": not a checkpoint file (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointFormatVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    try {
        ck.metadata = nlohmann::json::parse(r.get_string());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": corrupt metadata: " + e.what());
    }
    const auto count = r.get_count(kMaxTensors);
    ck.tensors.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor t;
        t.name = r.get_string();
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        if (rows * cols > kMaxElements) throw FormatError(path + ": tensor " + t.name + " too large");
        t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index a = 0; a < t.value.rows(); ++a)
            for (Eigen::Index b = 0; b < t.value.cols(); ++b) t.value(a, b) = r.get<double>();
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"dim", c.encoder.dim},
        {"heads", c.encoder.heads},
        {"max_seq_len", c.encoder.max_seq_len},
        {"weight_hidden", c.retriever.weight_hidden},
        {"score_hidden", c.retriever.score_hidden},
        {"tau", c.retriever.tau},
        {"fusion_dim", c.reader.fusion_dim},
        {"attention_hidden", c.reader.attention_hidden},
        {"k", c.k},
        {"k_fusion", c.k_fusion},
        {"uniform_weights", c.uniform_weights},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.encoder.dim = j.at("dim").get<int>();
        c.encoder.heads = j.at("heads").get<int>();
        c.encoder.max_seq_len = j.at("max_seq_len").get<int>();
        c.retriever.weight_hidden = j.at("weight_hidden").get<int>();
        c.retriever.score_hidden = j.at("score_hidden").get<int>();
        c.retriever.tau = j.at("tau").get<int>();
        c.reader.fusion_dim = j.at("fusion_dim").get<int>();
        c.reader.attention_hidden = j.at("attention_hidden").get<int>();
        c.k = j.at("k").get<int>();
        c.k_fusion = j.at("k_fusion").get<int>();
        c.uniform_weights = j.at("uniform_weights").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config: ") + e.what());
    }
    return c;
}

Checkpoint model_checkpoint(const Model& model) {
    Checkpoint ck;
    ck.metadata["model"] = to_json(model.config);
    ck.metadata["vocab_size"] = model.vocab.size();
    ck.tensors = model.params.tensors();
    return ck;
}

Model restore_model(const Checkpoint& checkpoint, Vocabulary vocab) {
    if (!checkpoint.metadata.contains("model")) throw FormatError("checkpoint has no model config");
    if (checkpoint.metadata.value("vocab_size", -1) != vocab.size())
        throw FormatError("vocabulary size does not match the checkpoint");
    Model model = Model::create(model_config_from_json(checkpoint.metadata.at("model")), std::move(vocab), 0);
    for (auto& t : model.params.tensors()) {
        const Tensor* src = checkpoint.find(t.name);
        if (!src) throw FormatError("checkpoint lacks tensor " + t.name);
        if (src->value.rows() != t.value.rows() || src->value.cols() != t.value.cols())
            throw FormatError("tensor " + t.name + " has the wrong shape");
        t.value = src->value;
    }
    return model;
}

}  // namespace sqa
