#pragma once

#include "generallog/event_embedding.hpp"
#include "generallog/log_sequence.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace generallog::routing {

/// Embeddings of every source-system event; immutable once built.
struct SourceEmbeddingIndex {
    std::vector<embedding::EventEmbedding> vectors;
    std::string built_from;

    /// All embeddings whose template id occurs in `source_sequences`, ordered by id.
    static SourceEmbeddingIndex build(std::span<const LogSequence> source_sequences,
                                      const embedding::EmbeddingMap& embeddings, std::string system);
};

enum class Route { General, Proprietary };

std::string_view to_string(Route route) noexcept;

struct RouterConfig {
    double tau = 0.5;

    void validate() const;
};

struct RouteDecision {
    std::string sequence_id;
    double score = 0.0;
    Route route = Route::Proprietary;
    std::size_t argmin_event_index = 0;
    std::vector<double> per_event_scores;
};

/// v.u / (|v| |u|), clamped to [-1, 1]; 0 when either norm is 0.
/// Throws Error(DimensionMismatch).
double cosine(std::span<const double> v, std::span<const double> u);

/// max_j cosine(v, u_j). Throws Error(EmptyIndex).
double event_similarity(const embedding::EventEmbedding& v, const SourceEmbeddingIndex& index);

struct SequenceSimilarity {
    double score = 0.0;
    std::vector<double> per_event_scores;
    std::size_t argmin_index = 0;  // first minimum
};

SequenceSimilarity sequence_similarity(const LogSequence& seq, const SourceEmbeddingIndex& index,
                                       const embedding::EmbeddingMap& embeddings);

/// General iff score >= tau.
RouteDecision route(const LogSequence& seq, const SourceEmbeddingIndex& index,
                    const embedding::EmbeddingMap& embeddings, const RouterConfig& config);

struct RouteError {
    std::size_t position = 0;
    std::string sequence_id;
    std::string message;
};

/// Order-preserving partition. Positions index the input; sequences that fail
/// to route appear only in `errors`.
struct RoutedCorpus {
    std::vector<std::size_t> general;
    std::vector<std::size_t> proprietary;
    std::vector<RouteDecision> decisions;  // one per routed input, input order
    std::vector<RouteError> errors;
};

RoutedCorpus route_corpus(std::span<const LogSequence> seqs, const SourceEmbeddingIndex& index,
                          const embedding::EmbeddingMap& embeddings, const RouterConfig& config);

/// Re-applies a new threshold to already scored decisions.
RoutedCorpus reroute(const RoutedCorpus& scored, const RouterConfig& config);

/// "<sequence_id>\t<score 6dp>\t<General|Proprietary>\t<argmin_event_index>"
void write_decisions(std::ostream& out, std::span<const RouteDecision> decisions);

}  // namespace generallog::routing
