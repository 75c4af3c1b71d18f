#pragma once

#include "generallog/event_embedding.hpp"
#include "generallog/log_parsing.hpp"
#include "generallog/meta_trainer.hpp"
#include "generallog/rag_pipeline.hpp"
#include "generallog/semantic_router.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace generallog::config {

inline constexpr int kConfigVersion = 1;

/// How one system's raw logs become sequences.
struct SystemConfig {
    std::string format = "session";  // session | hdfs | bgl
    std::filesystem::path log;
    std::filesystem::path labels;  // optional; for the target, evaluation only
    std::string session_regex;
    std::string header_regex;
    std::vector<std::string> header_fields;
    /// (regex, replacement); empty means the built-in masks.
    std::vector<std::pair<std::string, std::string>> masks;

    [[nodiscard]] parsing::LineFormat line_format() const;
};

struct PipelineConfig {
    int config_version = kConfigVersion;
    std::uint64_t seed = 7;
    SystemConfig source;
    SystemConfig target;
    parsing::ParserConfig parser;
    std::size_t embedding_dim = 64;
    std::filesystem::path word_vectors;  // optional
    embedding::FallbackMode fallback = embedding::FallbackMode::HashDeterministic;
    routing::RouterConfig router;
    training::TrainConfig train;
    std::size_t rag_k = 5;
    bool llm_mock = true;
    rag::LlmClientConfig llm;
    std::size_t bgl_window = 100;
    std::size_t bgl_stride = 100;
    std::filesystem::path checkpoint;  // optional; loaded instead of training when it exists
    std::vector<double> sweep_taus{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    bool sweep_retrain = false;

    /// Throws Error(Config).
    void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Relative paths resolve
/// against `base_dir`. Throws Error(Config) naming the line.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(render_config(c)) reproduces c.
std::string render_config(const PipelineConfig& cfg);

}  // namespace generallog::config
