#pragma once

#include "generallog/event_embedding.hpp"
#include "generallog/log_sequence.hpp"
#include "generallog/meta_trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace generallog::rag {

/// Small-model probabilities inside this closed band never enter the knowledge base.
inline constexpr double kLowConfidence = 0.4;
inline constexpr double kHighConfidence = 0.6;

struct KbEntry {
    std::string sequence_id;
    embedding::Vector embedding;
    double norm = 0.0;
    std::string rendered_text;
    int predicted_label = 0;
    double confidence = 0.5;  // small-model anomaly probability
};

struct KnowledgeBase {
    std::vector<KbEntry> entries;
    std::size_t excluded = 0;  // dropped by the confidence filter

    [[nodiscard]] bool empty() const { return entries.empty(); }
    [[nodiscard]] std::size_t size() const { return entries.size(); }
};

/// One entry per General sequence outside the low-confidence band.
/// Throws Error(LengthMismatch) when the two lists differ in length.
KnowledgeBase build_kb(std::span<const LogSequence> general, std::span<const training::Prediction> predictions,
                       const embedding::EmbeddingMap& embeddings, const TemplateCatalog& catalog);

struct Neighbor {
    std::size_t index = 0;  // into KnowledgeBase::entries
    double similarity = 0.0;
};

/// Exact top-k by cosine, ties broken by ascending sequence id.
std::vector<Neighbor> retrieve(const KnowledgeBase& kb, std::span<const double> query, std::size_t k);

std::string build_prompt(const std::string& target_text, const KnowledgeBase& kb, std::span<const Neighbor> neighbors);

/// 1 for ANOMALY, 0 for NORMAL. Throws Error(UnparseableVerdict).
int parse_verdict(const std::string& response);

/// Deterministic stand-in: the label of the most similar neighbor listed in
/// the prompt, majority then ANOMALY on ties, ANOMALY with no neighbors.
std::string mock_llm(const std::string& prompt);

class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// Throws Error(Transport) when no response could be obtained.
    virtual std::string complete(const std::string& prompt) = 0;
    [[nodiscard]] virtual std::string_view name() const = 0;
    [[nodiscard]] virtual std::size_t max_retries() const { return 0; }
};

class MockLlmClient final : public LlmClient {
public:
    std::string complete(const std::string& prompt) override { return mock_llm(prompt); }
    [[nodiscard]] std::string_view name() const override { return "mock"; }
};

struct LlmClientConfig {
    std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key_env;  // name of the environment variable holding the key
    double timeout_seconds = 60.0;
    std::size_t max_retries = 2;

    void validate() const;
};

/// Chat-completions client. Temperature is always 0.
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(LlmClientConfig config);
    std::string complete(const std::string& prompt) override;
    [[nodiscard]] std::string_view name() const override { return "llm"; }
    [[nodiscard]] std::size_t max_retries() const override { return config_.max_retries; }

    /// Request body sent for `prompt`.
    [[nodiscard]] std::string request_body(const std::string& prompt) const;

private:
    LlmClientConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

struct Verdict {
    std::string sequence_id;
    int label = 1;
    std::string source;  // "llm" or "mock"
    std::string raw_response;
    std::vector<std::pair<std::string, double>> neighbors_used;
    bool flagged = false;  // label is the conservative default
    std::string note;
    std::size_t calls = 0;
};

/// Never throws for per-sequence problems: failures yield a flagged verdict with label 1.
Verdict detect_proprietary(const LogSequence& seq, const KnowledgeBase& kb, LlmClient& client,
                           const embedding::EmbeddingMap& embeddings, const TemplateCatalog& catalog,
                           std::size_t k);

void write_kb(std::ostream& out, const KnowledgeBase& kb);
KnowledgeBase read_kb(std::istream& in);
void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::filesystem::path& path);

}  // namespace generallog::rag
