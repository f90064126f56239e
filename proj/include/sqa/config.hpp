#pragma once

#include "sqa/index.hpp"
#include "sqa/model.hpp"
#include "sqa/synthetic.hpp"
#include "sqa/text.hpp"
#include "sqa/training.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace sqa {

/// Bad configuration key or value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a run needs. Loaded from a TOML-style file of `key = value`
/// lines under [section] headers; keys are addressed as "section.key".
struct RunConfig {
    std::string corpus;
    std::string questions;
    std::string qrels;
    std::string stopwords;  // empty: built-in list

    std::string tokenizer_mode = "word";
    bool lowercase = true;
    Bm25Params bm25;

    ModelConfig model;
    HyperParams train;
    Mixture mixture;
    bool has_mixture = false;  // otherwise tuned on dev
    SynthSpec synth;

    /// Throws ConfigError for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);

    /// Every key with its resolved value, loadable again.
    std::string to_toml() const;

    Tokenizer make_tokenizer() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<stream>");
RunConfig load_config(const std::string& path);

/// Overrides in "section.key=value" form, applied in order.
void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& overrides);

}  // namespace sqa
