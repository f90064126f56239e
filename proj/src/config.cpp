#include "sqa/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <type_traits>
#include <variant>

namespace sqa {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad value for " + key + ": " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("bad value for " + key + ": " + v + " (expected true or false)");
}

std::string quote_string(const std::string& s) { return "\"" + s + "\""; }

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

using Ref = std::variant<std::string*, bool*, int*, double*, std::uint64_t*>;
using Accessor = Ref (*)(RunConfig&);

// Ordered so that to_toml groups keys by section.
const std::vector<std::pair<std::string, Accessor>>& fields() {
    static const std::vector<std::pair<std::string, Accessor>> table = {
        {"data.corpus", [](RunConfig& c) -> Ref { return &c.corpus; }},
        {"data.questions", [](RunConfig& c) -> Ref { return &c.questions; }},
        {"data.qrels", [](RunConfig& c) -> Ref { return &c.qrels; }},
        {"data.stopwords", [](RunConfig& c) -> Ref { return &c.stopwords; }},
        {"tokenizer.mode", [](RunConfig& c) -> Ref { return &c.tokenizer_mode; }},
        {"tokenizer.lowercase", [](RunConfig& c) -> Ref { return &c.lowercase; }},
        {"bm25.k1", [](RunConfig& c) -> Ref { return &c.bm25.k1; }},
        {"bm25.b", [](RunConfig& c) -> Ref { return &c.bm25.b; }},
        {"model.dim", [](RunConfig& c) -> Ref { return &c.model.encoder.dim; }},
        {"model.heads", [](RunConfig& c) -> Ref { return &c.model.encoder.heads; }},
        {"model.max_seq_len", [](RunConfig& c) -> Ref { return &c.model.encoder.max_seq_len; }},
        {"model.weight_hidden", [](RunConfig& c) -> Ref { return &c.model.retriever.weight_hidden; }},
        {"model.score_hidden", [](RunConfig& c) -> Ref { return &c.model.retriever.score_hidden; }},
        {"model.fusion_dim", [](RunConfig& c) -> Ref { return &c.model.reader.fusion_dim; }},
        {"model.attention_hidden", [](RunConfig& c) -> Ref { return &c.model.reader.attention_hidden; }},
        {"model.k", [](RunConfig& c) -> Ref { return &c.model.k; }},
        {"model.k_fusion", [](RunConfig& c) -> Ref { return &c.model.k_fusion; }},
        {"model.tau", [](RunConfig& c) -> Ref { return &c.model.retriever.tau; }},
        {"model.uniform_weights", [](RunConfig& c) -> Ref { return &c.model.uniform_weights; }},
        {"train.epochs", [](RunConfig& c) -> Ref { return &c.train.epochs; }},
        {"train.batch_size", [](RunConfig& c) -> Ref { return &c.train.batch_size; }},
        {"train.learning_rate", [](RunConfig& c) -> Ref { return &c.train.learning_rate; }},
        {"train.warmup_fraction", [](RunConfig& c) -> Ref { return &c.train.warmup_fraction; }},
        {"train.clip_norm", [](RunConfig& c) -> Ref { return &c.train.clip_norm; }},
        {"train.refresh_interval", [](RunConfig& c) -> Ref { return &c.train.refresh_interval; }},
        {"train.seed", [](RunConfig& c) -> Ref { return &c.train.seed; }},
        {"train.threads", [](RunConfig& c) -> Ref { return &c.train.threads; }},
        {"synth.num_questions", [](RunConfig& c) -> Ref { return &c.synth.num_questions; }},
        {"synth.vocab_size", [](RunConfig& c) -> Ref { return &c.synth.vocab_size; }},
        {"synth.num_noise_words_per_scenario", [](RunConfig& c) -> Ref { return &c.synth.num_noise_words_per_scenario; }},
        {"synth.num_signal_words", [](RunConfig& c) -> Ref { return &c.synth.num_signal_words; }},
        {"synth.num_paragraphs", [](RunConfig& c) -> Ref { return &c.synth.num_paragraphs; }},
        {"synth.seed", [](RunConfig& c) -> Ref { return &c.synth.seed; }},
        {"synth.num_options", [](RunConfig& c) -> Ref { return &c.synth.num_options; }},
        {"synth.questions_per_topic", [](RunConfig& c) -> Ref { return &c.synth.questions_per_topic; }},
        {"synth.topic_words", [](RunConfig& c) -> Ref { return &c.synth.topic_words; }},
        {"synth.min_paragraph_words", [](RunConfig& c) -> Ref { return &c.synth.min_paragraph_words; }},
        {"synth.max_paragraph_words", [](RunConfig& c) -> Ref { return &c.synth.max_paragraph_words; }},
        {"synth.min_filler", [](RunConfig& c) -> Ref { return &c.synth.min_filler; }},
        {"synth.max_filler", [](RunConfig& c) -> Ref { return &c.synth.max_filler; }},
        {"synth.fact_repeats", [](RunConfig& c) -> Ref { return &c.synth.fact_repeats; }},
        {"synth.fact_reuse", [](RunConfig& c) -> Ref { return &c.synth.fact_reuse; }},
        {"synth.easy_fraction", [](RunConfig& c) -> Ref { return &c.synth.easy_fraction; }},
        {"synth.easy_noise_words", [](RunConfig& c) -> Ref { return &c.synth.easy_noise_words; }},
    };
    return table;
}

Accessor find_field(const std::string& key) {
    for (const auto& [name, f] : fields())
        if (name == key) return f;
    return nullptr;
}

void assign(Ref ref, const std::string& key, const std::string& v) {
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) {
                *p = v;
            } else if constexpr (std::is_same_v<T, bool>) {
                *p = parse_bool(key, v);
            } else {
                *p = parse_number<T>(key, v);
            }
        },
        ref);
}

std::string render(Ref ref) {
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return quote_string(*p);
            } else if constexpr (std::is_same_v<T, bool>) {
                return *p ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return num(*p);
            } else {
                return std::to_string(*p);
            }
        },
        ref);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string v = unquote(trim(value));
    if (key == "predict.alpha" || key == "predict.beta" || key == "predict.gamma") {
        const double x = parse_number<double>(key, v);
        if (x < 0 || x > 1) throw ConfigError(key + " must lie in [0, 1]");
        (key == "predict.alpha" ? mixture.alpha : key == "predict.beta" ? mixture.beta : mixture.gamma) = x;
        has_mixture = true;
        return;
    }
    const Accessor f = find_field(key);
    if (!f) throw ConfigError("unknown config key " + key);
    assign(f(*this), key, v);
}

std::string RunConfig::to_toml() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [name, f] : fields()) {
        const auto dot = name.find('.');
        const std::string s = name.substr(0, dot);
        if (s != section) {
            if (!section.empty()) os << '\n';
            os << '[' << s << "]\n";
            section = s;
        }
        os << name.substr(dot + 1) << " = " << render(f(const_cast<RunConfig&>(*this))) << '\n';
    }
    if (has_mixture)
        os << "\n[predict]\nalpha = " << num(mixture.alpha) << "\nbeta = " << num(mixture.beta)
           << "\ngamma = " << num(mixture.gamma) << '\n';
    return os.str();
}

Tokenizer RunConfig::make_tokenizer() const {
    Tokenizer t;
    try {
        t.mode = parse_tokenizer_mode(tokenizer_mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    t.lowercase = lowercase;
    t.stopwords = stopwords.empty() ? default_stopwords() : load_stopwords(stopwords);
    return t;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
    RunConfig c;
    std::string section;
    std::string raw;
    for (int line_no = 1; std::getline(in, raw); ++line_no) {
        std::string line = raw;
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_string = !in_string;
            if (line[i] == '#' && !in_string) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        try {
            c.set(section.empty() ? key : section + "." + key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    return parse_config(in, path);
}

void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& overrides) {
    for (const auto& [k, v] : overrides) config.set(k, v);
}

}  // namespace sqa
