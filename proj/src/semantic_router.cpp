#include "generallog/semantic_router.hpp"

#include "generallog/errors.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace generallog::routing {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_with_norms(std::span<const double> v, double nv, std::span<const double> u, double nu) {
    if (v.size() != u.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of " + std::to_string(v.size()) + "-d and " + std::to_string(u.size()) + "-d vectors");
    }
    if (nv == 0.0 || nu == 0.0) return 0.0;
    return std::clamp(dot(v, u) / (nv * nu), -1.0, 1.0);
}

}  // namespace

std::string_view to_string(Route route) noexcept {
    return route == Route::General ? "General" : "Proprietary";
}

void RouterConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorCode::Config, "router tau must lie in [0, 1]");
}

SourceEmbeddingIndex SourceEmbeddingIndex::build(std::span<const LogSequence> source_sequences,
                                                 const embedding::EmbeddingMap& embeddings,
                                                 std::string system) {
    std::set<std::uint32_t> ids;
    for (const auto& seq : source_sequences) ids.insert(seq.template_ids.begin(), seq.template_ids.end());
    SourceEmbeddingIndex index;
    index.built_from = std::move(system);
    for (const auto id : ids) {
        const auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::UnknownTemplate, "source template " + std::to_string(id) + " has no embedding");
        }
        index.vectors.push_back(it->second);
    }
    return index;
}

double cosine(std::span<const double> v, std::span<const double> u) {
    return cosine_with_norms(v, embedding::euclidean_norm(v), u, embedding::euclidean_norm(u));
}

double event_similarity(const embedding::EventEmbedding& v, const SourceEmbeddingIndex& index) {
    if (index.vectors.empty()) throw Error(ErrorCode::EmptyIndex, "source embedding index is empty");
    double best = -1.0;
    for (const auto& u : index.vectors) {
        best = std::max(best, cosine_with_norms(v.vector, v.norm, u.vector, u.norm));
    }
    return best;
}

SequenceSimilarity sequence_similarity(const LogSequence& seq, const SourceEmbeddingIndex& index,
                                       const embedding::EmbeddingMap& embeddings) {
    if (seq.template_ids.empty()) throw Error(ErrorCode::EmptySequence, "sequence '" + seq.id + "' is empty");
    if (index.vectors.empty()) throw Error(ErrorCode::EmptyIndex, "source embedding index is empty");
    SequenceSimilarity out;
    out.per_event_scores.reserve(seq.template_ids.size());
    for (const auto id : seq.template_ids) {
        const auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::UnknownTemplate, "template id " + std::to_string(id) + " in sequence '" +
                                                        seq.id + "' has no embedding");
        }
        out.per_event_scores.push_back(event_similarity(it->second, index));
    }
    out.argmin_index = 0;
    for (std::size_t i = 1; i < out.per_event_scores.size(); ++i) {
        if (out.per_event_scores[i] < out.per_event_scores[out.argmin_index]) out.argmin_index = i;
    }
    out.score = out.per_event_scores[out.argmin_index];
    return out;
}

RouteDecision route(const LogSequence& seq, const SourceEmbeddingIndex& index,
                    const embedding::EmbeddingMap& embeddings, const RouterConfig& config) {
    config.validate();
    auto sim = sequence_similarity(seq, index, embeddings);
    RouteDecision d;
    d.sequence_id = seq.id;
    d.score = sim.score;
    d.route = sim.score >= config.tau ? Route::General : Route::Proprietary;
    d.argmin_event_index = sim.argmin_index;
    d.per_event_scores = std::move(sim.per_event_scores);
    return d;
}

RoutedCorpus route_corpus(std::span<const LogSequence> seqs, const SourceEmbeddingIndex& index,
                          const embedding::EmbeddingMap& embeddings, const RouterConfig& config) {
    config.validate();
    RoutedCorpus out;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        try {
            auto decision = route(seqs[i], index, embeddings, config);
            (decision.route == Route::General ? out.general : out.proprietary).push_back(i);
            out.decisions.push_back(std::move(decision));
        } catch (const Error& e) {
            out.errors.push_back({i, seqs[i].id, e.what()});
        }
    }
    return out;
}

RoutedCorpus reroute(const RoutedCorpus& scored, const RouterConfig& config) {
    config.validate();
    RoutedCorpus out;
    out.errors = scored.errors;
    out.decisions = scored.decisions;
    // Positions of routed items, recovered by merging the two index lists.
    std::vector<std::size_t> positions;
    positions.reserve(scored.general.size() + scored.proprietary.size());
    std::merge(scored.general.begin(), scored.general.end(), scored.proprietary.begin(),
               scored.proprietary.end(), std::back_inserter(positions));
    for (std::size_t k = 0; k < out.decisions.size(); ++k) {
        auto& d = out.decisions[k];
        d.route = d.score >= config.tau ? Route::General : Route::Proprietary;
        (d.route == Route::General ? out.general : out.proprietary).push_back(positions[k]);
    }
    return out;
}

void write_decisions(std::ostream& out, std::span<const RouteDecision> decisions) {
    for (const auto& d : decisions) {
        out << d.sequence_id << '\t' << text::fixed(d.score, 6) << '\t' << to_string(d.route) << '\t'
            << d.argmin_event_index << '\n';
    }
}

}  // namespace generallog::routing
