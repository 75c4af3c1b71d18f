#include "generallog/config.hpp"

#include "generallog/errors.hpp"
#include "generallog/loaders.hpp"
#include "generallog/text.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace generallog::config {

namespace {

std::string shortest(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

class Parser {
public:
    Parser(PipelineConfig& cfg, std::filesystem::path base) : cfg_(cfg), base_(std::move(base)) { register_keys(); }

    void apply(std::size_t line_number, const std::string& key, const std::string& value) {
        line_ = line_number;
        key_ = key;
        const auto it = setters_.find(key);
        if (it == setters_.end()) fail("unknown key");
        try {
            it->second(value);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Config) throw;
            fail(e.what());
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::Config, "line " + std::to_string(line_) + " (" + key_ + "): " + what);
    }

private:
    std::filesystem::path resolve(const std::string& value) const {
        if (value.empty()) return {};
        std::filesystem::path p(value);
        return p.is_absolute() || base_.empty() ? p : base_ / p;
    }

    std::size_t count(const std::string& v) const {
        const auto n = text::parse_int(v);
        if (n < 0) fail("must be non-negative");
        return static_cast<std::size_t>(n);
    }

    bool boolean(const std::string& v) const {
        const auto lower = text::to_lower(v);
        if (lower == "true" || lower == "1" || lower == "yes") return true;
        if (lower == "false" || lower == "0" || lower == "no") return false;
        fail("expected true or false");
    }

    void system_keys(const std::string& prefix, SystemConfig& s) {
        setters_[prefix + "format"] = [this, &s](const std::string& v) { s.format = text::to_lower(v); };
        setters_[prefix + "log"] = [this, &s](const std::string& v) { s.log = resolve(v); };
        setters_[prefix + "labels"] = [this, &s](const std::string& v) { s.labels = resolve(v); };
        setters_[prefix + "session_regex"] = [&s](const std::string& v) { s.session_regex = v; };
        setters_[prefix + "header_regex"] = [&s](const std::string& v) { s.header_regex = v; };
        setters_[prefix + "header_fields"] = [&s](const std::string& v) {
            s.header_fields.clear();
            for (const auto& f : text::split(v, ',')) s.header_fields.emplace_back(text::trim(f));
        };
        setters_[prefix + "mask"] = [this, &s](const std::string& v) {
            const auto arrow = v.find(" => ");
            if (arrow == std::string::npos) fail("expected 'regex => replacement'");
            s.masks.emplace_back(std::string(text::trim(v.substr(0, arrow))), std::string(text::trim(v.substr(arrow + 4))));
        };
    }

    void register_keys() {
        auto& c = cfg_;
        setters_["config_version"] = [this, &c](const std::string& v) {
            c.config_version = static_cast<int>(text::parse_int(v));
            if (c.config_version != kConfigVersion) fail("unsupported config version " + v);
        };
        setters_["seed"] = [this, &c](const std::string& v) {
            c.seed = count(v);
            c.train.seed = c.seed;
        };
        system_keys("source.", c.source);
        system_keys("target.", c.target);
        setters_["parser.depth"] = [this, &c](const std::string& v) { c.parser.depth = count(v); };
        setters_["parser.sim_threshold"] = [&c](const std::string& v) { c.parser.sim_threshold = text::parse_double(v); };
        setters_["parser.max_children"] = [this, &c](const std::string& v) { c.parser.max_children = count(v); };
        setters_["embedding.dim"] = [this, &c](const std::string& v) { c.embedding_dim = count(v); };
        setters_["embedding.word_vectors"] = [this, &c](const std::string& v) { c.word_vectors = resolve(v); };
        setters_["embedding.fallback"] = [this, &c](const std::string& v) {
            const auto lower = text::to_lower(v);
            if (lower == "hash") c.fallback = embedding::FallbackMode::HashDeterministic;
            else if (lower == "zero") c.fallback = embedding::FallbackMode::Zero;
            else fail("expected hash or zero");
        };
        setters_["router.tau"] = [&c](const std::string& v) { c.router.tau = text::parse_double(v); };
        auto& t = c.train;
        setters_["train.delta"] = [&t](const std::string& v) { t.delta = text::parse_double(v); };
        setters_["train.alpha"] = [&t](const std::string& v) { t.alpha = text::parse_double(v); };
        setters_["train.beta"] = [&t](const std::string& v) { t.beta = text::parse_double(v); };
        setters_["train.gamma"] = [&t](const std::string& v) { t.gamma = text::parse_double(v); };
        setters_["train.inner_steps"] = [this, &t](const std::string& v) { t.inner_steps = count(v); };
        setters_["train.tasks_per_meta_batch"] = [this, &t](const std::string& v) { t.tasks_per_meta_batch = count(v); };
        setters_["train.support_size"] = [this, &t](const std::string& v) { t.support_size = count(v); };
        setters_["train.query_size"] = [this, &t](const std::string& v) { t.query_size = count(v); };
        setters_["train.epochs"] = [this, &t](const std::string& v) { t.epochs = count(v); };
        setters_["train.head_lr"] = [&t](const std::string& v) { t.head_lr = text::parse_double(v); };
        setters_["train.hidden_dim"] = [this, &t](const std::string& v) { t.hidden_dim = count(v); };
        setters_["train.decision_threshold"] = [&t](const std::string& v) { t.decision_threshold = text::parse_double(v); };
        setters_["rag.k"] = [this, &c](const std::string& v) { c.rag_k = count(v); };
        setters_["llm.mock"] = [this, &c](const std::string& v) { c.llm_mock = boolean(v); };
        setters_["llm.endpoint"] = [&c](const std::string& v) { c.llm.endpoint = v; };
        setters_["llm.model"] = [&c](const std::string& v) { c.llm.model = v; };
        setters_["llm.api_key_env"] = [&c](const std::string& v) { c.llm.api_key_env = v; };
        setters_["llm.timeout_seconds"] = [&c](const std::string& v) { c.llm.timeout_seconds = text::parse_double(v); };
        setters_["llm.max_retries"] = [this, &c](const std::string& v) { c.llm.max_retries = count(v); };
        setters_["bgl.window"] = [this, &c](const std::string& v) { c.bgl_window = count(v); };
        setters_["bgl.stride"] = [this, &c](const std::string& v) { c.bgl_stride = count(v); };
        setters_["paths.checkpoint"] = [this, &c](const std::string& v) { c.checkpoint = resolve(v); };
        setters_["sweep.taus"] = [&c](const std::string& v) {
            c.sweep_taus.clear();
            for (const auto& f : text::split(v, ',')) c.sweep_taus.push_back(text::parse_double(f));
        };
        setters_["sweep.retrain"] = [this, &c](const std::string& v) { c.sweep_retrain = boolean(v); };
    }

    PipelineConfig& cfg_;
    std::filesystem::path base_;
    std::map<std::string, std::function<void(const std::string&)>> setters_;
    std::size_t line_ = 0;
    std::string key_;
};

}  // namespace

parsing::LineFormat SystemConfig::line_format() const {
    std::vector<parsing::MaskRule> rules;
    if (masks.empty()) {
        rules = loaders::default_masks();
    } else {
        for (const auto& [pattern, replacement] : masks) rules.push_back(parsing::MaskRule::compile(pattern, replacement));
    }
    if (!header_regex.empty()) return parsing::LineFormat(header_regex, header_fields, std::move(rules));
    if (format == "hdfs" || format == "bgl") {
        const auto builtin = format == "hdfs" ? loaders::hdfs_format() : loaders::bgl_format();
        return parsing::LineFormat(builtin.header_regex(), builtin.header_fields(), std::move(rules));
    }
    return parsing::LineFormat("", {}, std::move(rules));
}

void PipelineConfig::validate() const {
    const auto bad = [](const std::string& what) { return Error(ErrorCode::Config, what); };
    if (config_version != kConfigVersion) throw bad("config_version must be " + std::to_string(kConfigVersion));
    for (const auto* side : {&source, &target}) {
        const std::string name = side == &source ? "source" : "target";
        if (side->format != "session" && side->format != "hdfs" && side->format != "bgl") {
            throw bad(name + ".format must be session, hdfs or bgl");
        }
        if (side->log.empty()) throw bad(name + ".log must be set");
        if (side->format == "session" && side->session_regex.empty()) {
            throw bad(name + ".session_regex is required for the session format");
        }
        if (!side->header_regex.empty() && side->header_fields.empty()) throw bad(name + ".header_fields must be set");
    }
    if (source.labels.empty() && source.format != "bgl") throw bad("source.labels must be set");
    parser.validate();
    if (embedding_dim == 0) throw bad("embedding.dim must be >= 1");
    router.validate();
    train.validate();
    if (rag_k == 0) throw bad("rag.k must be >= 1");
    if (!llm_mock) llm.validate();
    if (bgl_window == 0 || bgl_stride == 0) throw bad("bgl.window and bgl.stride must be >= 1");
    if (sweep_taus.empty()) throw bad("sweep.taus must not be empty");
    for (const double t : sweep_taus) {
        if (!(t >= 0.0 && t <= 1.0)) throw bad("sweep.taus values must lie in [0, 1]");
    }
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    Parser parser(cfg, base_dir);
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    bool versioned = false;
    while (std::getline(in, line)) {
        ++number;
        const auto body = text::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::Config, "line " + std::to_string(number) + ": expected key = value");
        }
        const std::string key(text::trim(body.substr(0, eq)));
        const std::string value(text::trim(body.substr(eq + 1)));
        if (key == "config_version") versioned = true;
        parser.apply(number, key, value);
    }
    if (!versioned) throw Error(ErrorCode::Config, "missing config_version");
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return parse_config(text::read_file(path), path.parent_path());
}

std::string render_config(const PipelineConfig& c) {
    std::ostringstream out;
    const auto kv = [&out](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
    kv("config_version", std::to_string(c.config_version));
    kv("seed", std::to_string(c.seed));
    for (const auto* side : {&c.source, &c.target}) {
        const std::string p = side == &c.source ? "source." : "target.";
        out << '\n';
        kv(p + "format", side->format);
        kv(p + "log", side->log.string());
        if (!side->labels.empty()) kv(p + "labels", side->labels.string());
        if (!side->session_regex.empty()) kv(p + "session_regex", side->session_regex);
        if (!side->header_regex.empty()) kv(p + "header_regex", side->header_regex);
        if (!side->header_fields.empty()) kv(p + "header_fields", text::join(side->header_fields, ","));
        for (const auto& [pattern, replacement] : side->masks) kv(p + "mask", pattern + " => " + replacement);
    }
    out << '\n';
    kv("parser.depth", std::to_string(c.parser.depth));
    kv("parser.sim_threshold", shortest(c.parser.sim_threshold));
    kv("parser.max_children", std::to_string(c.parser.max_children));
    kv("embedding.dim", std::to_string(c.embedding_dim));
    if (!c.word_vectors.empty()) kv("embedding.word_vectors", c.word_vectors.string());
    kv("embedding.fallback", c.fallback == embedding::FallbackMode::Zero ? "zero" : "hash");
    kv("router.tau", shortest(c.router.tau));
    const auto& t = c.train;
    kv("train.delta", shortest(t.delta));
    kv("train.alpha", shortest(t.alpha));
    kv("train.beta", shortest(t.beta));
    kv("train.gamma", shortest(t.gamma));
    kv("train.inner_steps", std::to_string(t.inner_steps));
    kv("train.tasks_per_meta_batch", std::to_string(t.tasks_per_meta_batch));
    kv("train.support_size", std::to_string(t.support_size));
    kv("train.query_size", std::to_string(t.query_size));
    kv("train.epochs", std::to_string(t.epochs));
    kv("train.head_lr", shortest(t.head_lr));
    kv("train.hidden_dim", std::to_string(t.hidden_dim));
    kv("train.decision_threshold", shortest(t.decision_threshold));
    kv("rag.k", std::to_string(c.rag_k));
    kv("llm.mock", c.llm_mock ? "true" : "false");
    if (!c.llm.endpoint.empty()) kv("llm.endpoint", c.llm.endpoint);
    if (!c.llm.model.empty()) kv("llm.model", c.llm.model);
    if (!c.llm.api_key_env.empty()) kv("llm.api_key_env", c.llm.api_key_env);
    kv("llm.timeout_seconds", shortest(c.llm.timeout_seconds));
    kv("llm.max_retries", std::to_string(c.llm.max_retries));
    kv("bgl.window", std::to_string(c.bgl_window));
    kv("bgl.stride", std::to_string(c.bgl_stride));
    if (!c.checkpoint.empty()) kv("paths.checkpoint", c.checkpoint.string());
    std::vector<std::string> taus;
    for (const double x : c.sweep_taus) taus.push_back(shortest(x));
    kv("sweep.taus", text::join(taus, ","));
    kv("sweep.retrain", c.sweep_retrain ? "true" : "false");
    return out.str();
}

}  // namespace generallog::config
