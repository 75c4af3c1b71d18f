#pragma once

#include "generallog/log_parsing.hpp"
#include "generallog/log_sequence.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace generallog::embedding {

using Vector = std::vector<double>;

enum class FallbackMode { HashDeterministic, Zero };

/// Word vectors shared by every system in a run; this single table is what
/// makes source and target embeddings comparable.
class WordVectorTable {
public:
    explicit WordVectorTable(std::size_t dimension, FallbackMode fallback = FallbackMode::HashDeterministic);

    /// Text format: "token v1 ... vd" per line, optional "N d" header line.
    /// With fallback Zero, unknown words contribute nothing.
    static WordVectorTable load(const std::filesystem::path& path, FallbackMode fallback);
    static WordVectorTable read(std::istream& in, FallbackMode fallback);

    /// Throws Error(DimensionMismatch) or Error(NonFinite).
    void set(const std::string& token, Vector vector);

    /// Stored vector, else the fallback for (token, d).
    [[nodiscard]] Vector lookup(const std::string& token) const;
    [[nodiscard]] bool contains(const std::string& token) const { return entries_.count(token) > 0; }

    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] FallbackMode fallback() const { return fallback_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

private:
    std::size_t dimension_;
    FallbackMode fallback_;
    std::unordered_map<std::string, Vector> entries_;
};

/// Unit-norm pseudo-random vector that depends only on the token bytes and d.
Vector hash_vector(std::string_view token, std::size_t dimension);

/// Splits on non-alphanumerics and camelCase, lowercases, and drops wildcards
/// and pure numbers.
std::vector<std::string> tokenize_template(const parsing::LogTemplate& tmpl);

class IdfWeights {
public:
    IdfWeights() = default;
    explicit IdfWeights(std::map<std::string, double> weights);

    /// Unseen tokens get the largest observed weight.
    [[nodiscard]] double weight(const std::string& token) const;
    [[nodiscard]] const std::map<std::string, double>& weights() const { return weights_; }

private:
    std::map<std::string, double> weights_;
    double max_weight_ = 1.0;
};

/// weight(t) = ln((1 + N) / (1 + df(t))) + 1. Throws Error(EmptyCorpus).
IdfWeights build_idf(std::span<const parsing::LogTemplate> templates);

struct EventEmbedding {
    std::uint32_t template_id = 0;
    Vector vector;
    double norm = 0.0;
    bool empty = false;  // template had no embeddable words
};

EventEmbedding embed_event(const parsing::LogTemplate& tmpl, const WordVectorTable& table,
                           const IdfWeights& idf);

using EmbeddingMap = std::unordered_map<std::uint32_t, EventEmbedding>;

struct EmbeddingReport {
    std::vector<std::uint32_t> empty_templates;
};

/// IDF over the union of all given templates, then one embedding per template.
EmbeddingMap embed_templates(std::span<const parsing::LogTemplate> templates,
                             const WordVectorTable& table, EmbeddingReport* report = nullptr);

/// Arithmetic mean of the event vectors.
/// Throws Error(EmptySequence) or Error(UnknownTemplate).
Vector embed_sequence(const LogSequence& seq, const EmbeddingMap& embeddings);

/// "<template_id>\t<v1> ... <vd>", ordered by template id.
void write_embeddings(std::ostream& out, const EmbeddingMap& embeddings);

double euclidean_norm(std::span<const double> v);

}  // namespace generallog::embedding
