#pragma once

#include "generallog/config.hpp"
#include "generallog/errors.hpp"
#include "generallog/event_embedding.hpp"
#include "generallog/loaders.hpp"
#include "generallog/log_sequence.hpp"
#include "generallog/meta_trainer.hpp"
#include "generallog/metrics.hpp"
#include "generallog/rag_pipeline.hpp"
#include "generallog/semantic_router.hpp"

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace generallog::pipeline {

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

/// One system's sequences after parsing and grouping.
struct SystemData {
    std::vector<LogSequence> sequences;
    std::vector<parsing::LogTemplate> templates;
    loaders::LoadReport report;
};

SystemData load_system(const config::SystemConfig& system, const std::string& name, parsing::ParserConfig parser,
                       std::size_t bgl_window, std::size_t bgl_stride);

/// Everything up to routing. Target sequences carry no labels; their truth
/// lives in `target_truth` and is used only for evaluation.
struct Prepared {
    SystemData source;
    SystemData target;
    std::vector<std::optional<int>> target_truth;
    TemplateCatalog catalog;
    embedding::EmbeddingMap embeddings;
    routing::SourceEmbeddingIndex index;
};

Prepared prepare(const config::PipelineConfig& cfg, std::vector<StageTiming>* timings = nullptr);

routing::RoutedCorpus route_target(const Prepared& data, const routing::RouterConfig& router);

/// Labeled source plus the target sequences at `general` positions.
training::DomainDataset make_dataset(const Prepared& data, std::span<const std::size_t> general);

/// Loads cfg.checkpoint when that file exists, otherwise trains. Returns
/// nothing when the General set is empty and no checkpoint exists.
std::optional<training::TrainedModel> obtain_model(const config::PipelineConfig& cfg, const Prepared& data,
                                                   std::span<const std::size_t> general, bool* loaded = nullptr);

training::TrainedModel model_from_checkpoint(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const training::TrainedModel& model);

std::unique_ptr<rag::LlmClient> make_client(const config::PipelineConfig& cfg);

struct ReportRow {
    std::string sequence_id;
    std::string route;  // General | Proprietary | Error
    double score = 0.0;
    std::string predictor;  // small_model | llm | mock | default
    int label = 1;
    std::optional<int> truth;
    bool flagged = false;
};

struct DetectionReport {
    double tau = 0.0;
    std::vector<ReportRow> rows;
    std::size_t general = 0;
    std::size_t proprietary = 0;
    std::size_t route_errors = 0;
    std::size_t llm_calls = 0;
    std::size_t kb_size = 0;
    bool model_loaded = false;
    /// Present only when every row has a truth label.
    std::optional<Metrics> all, on_general, on_proprietary;
    /// The small model alone on every target sequence; absent without a model.
    std::optional<Metrics> small_all, small_general, small_proprietary;
    std::vector<StageTiming> timings;
};

struct Artifacts {
    routing::RoutedCorpus routed;
    std::optional<training::TrainedModel> model;
    rag::KnowledgeBase kb;
    std::vector<rag::Verdict> verdicts;
    /// Small-model predictions for every target sequence (label 1, p 0.5 where
    /// the sequence cannot be encoded); empty without a model.
    std::vector<training::Prediction> small;
};

/// Routes, predicts General with the small model, builds the knowledge base
/// and asks `client` about every Proprietary sequence. `routed` must be
/// scored against `data`.
DetectionReport detect(const Prepared& data, const routing::RoutedCorpus& routed,
                       const std::optional<training::TrainedModel>& model, rag::LlmClient& client, std::size_t k,
                       double tau, Artifacts* artifacts = nullptr);

/// Full run: prepare, route, train or load, detect. With a non-empty
/// `out_dir` every artifact is written there. A null client uses the one the
/// config asks for.
DetectionReport run_pipeline(const config::PipelineConfig& cfg, const std::filesystem::path& out_dir = {},
                             rag::LlmClient* client = nullptr);

/// Header row, one row per sequence, a blank line and `key\tvalue` summary lines.
void write_report(std::ostream& out, const DetectionReport& report);
void write_timings(std::ostream& out, std::span<const StageTiming> timings);

struct ParsedReport {
    std::vector<ReportRow> rows;
    std::vector<std::pair<std::string, std::string>> summary;
};

/// Throws Error(Io) on a malformed report.
ParsedReport read_report(std::istream& in);

struct SweepRow {
    double tau = 0.0;
    std::size_t general = 0;
    std::size_t proprietary = 0;
    double general_frac = 0.0;
    /// Small model alone on each partition and on everything.
    double f1_small_general = 0.0, f1_small_proprietary = 0.0, f1_small_all = 0.0;
    /// The full pipeline: small model on General, LLM path on Proprietary.
    double f1_pipeline_proprietary = 0.0, f1_pipeline_all = 0.0;
    std::size_t llm_calls = 0;
};

/// One evaluation per tau over a single preparation. The model is trained
/// once at cfg.router.tau unless cfg.sweep_retrain is set. Requires truth for
/// every target sequence (Error(InvalidArgument) otherwise).
std::vector<SweepRow> sweep_threshold(const config::PipelineConfig& cfg, std::span<const double> taus,
                                      rag::LlmClient* client = nullptr);

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows);
/// `tau\tgeneral_frac\tf1_general\tf1_proprietary\tf1_all` with the small
/// model's F1 on each partition.
void write_sweep_plot(std::ostream& out, std::span<const SweepRow> rows);

/// Runs `body` and records its wall time; any Error is rethrown with the
/// stage name prepended and its code kept.
template <typename F>
auto timed_stage(const std::string& stage, std::vector<StageTiming>* timings, F&& body) -> decltype(body()) {
    const auto start = std::chrono::steady_clock::now();
    const auto record = [&] {
        if (timings == nullptr) return;
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        timings->push_back({stage, elapsed.count()});
    };
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            record();
        } else {
            auto result = body();
            record();
            return result;
        }
    } catch (const Error& e) {
        throw Error(e.code(), "stage " + stage + ": " + e.what());
    }
}

}  // namespace generallog::pipeline
