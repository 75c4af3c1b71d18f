#include "generallog/event_embedding.hpp"

#include "generallog/errors.hpp"
#include "generallog/random.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace generallog::embedding {

namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

void split_camel(std::string_view word, std::vector<std::string>& out) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < word.size(); ++i) {
        const bool lower_to_upper = is_lower(word[i - 1]) && is_upper(word[i]);
        const bool acronym_end = is_upper(word[i - 1]) && is_upper(word[i]) && i + 1 < word.size() &&
                                 is_lower(word[i + 1]);
        if (lower_to_upper || acronym_end) {
            out.emplace_back(word.substr(start, i - start));
            start = i;
        }
    }
    out.emplace_back(word.substr(start));
}

}  // namespace

WordVectorTable::WordVectorTable(std::size_t dimension, FallbackMode fallback)
    : dimension_(dimension), fallback_(fallback) {
    if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "word vector dimension must be >= 1");
}

void WordVectorTable::set(const std::string& token, Vector vector) {
    if (vector.size() != dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "vector for '" + token + "' has " +
                                                      std::to_string(vector.size()) + " components, table d=" +
                                                      std::to_string(dimension_));
    }
    if (!std::all_of(vector.begin(), vector.end(), [](double x) { return std::isfinite(x); })) {
        throw Error(ErrorCode::NonFinite, "vector for '" + token + "' has non-finite components");
    }
    entries_[token] = std::move(vector);
}

Vector WordVectorTable::lookup(const std::string& token) const {
    if (const auto it = entries_.find(token); it != entries_.end()) return it->second;
    if (fallback_ == FallbackMode::Zero) return Vector(dimension_, 0.0);
    return hash_vector(token, dimension_);
}

WordVectorTable WordVectorTable::read(std::istream& in, FallbackMode fallback) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        auto fields = text::split_whitespace(line);
        if (!fields.empty()) rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw Error(ErrorCode::Io, "word vector file is empty");
    std::size_t first = 0;
    if (rows[0].size() == 2 && all_digits(rows[0][0]) && all_digits(rows[0][1])) first = 1;
    if (first >= rows.size()) throw Error(ErrorCode::Io, "word vector file has a header but no vectors");
    const std::size_t d = rows[first].size() - 1;
    if (d == 0) throw Error(ErrorCode::Io, "word vector rows need at least one component");
    WordVectorTable table(d, fallback);
    for (std::size_t r = first; r < rows.size(); ++r) {
        Vector v;
        v.reserve(rows[r].size() - 1);
        for (std::size_t c = 1; c < rows[r].size(); ++c) v.push_back(text::parse_double(rows[r][c]));
        table.set(text::to_lower(rows[r][0]), std::move(v));
    }
    return table;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path, FallbackMode fallback) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open word vectors " + path.string());
    return read(in, fallback);
}

Vector hash_vector(std::string_view token, std::size_t dimension) {
    std::uint64_t state = fnv1a(token.data(), token.size()) ^ mix64(dimension);
    Vector v(dimension);
    double sq = 0.0;
    for (auto& x : v) {
        state = mix64(state);
        // 53-bit integer draw, exact in double, mapped to [-1, 1).
        x = static_cast<double>(state >> 11) * 0x1.0p-52 - 1.0;
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
    return v;
}

std::vector<std::string> tokenize_template(const parsing::LogTemplate& tmpl) {
    std::vector<std::string> words;
    for (const auto& token : tmpl.tokens) {
        if (token == parsing::kWildcard) continue;
        std::size_t i = 0;
        while (i < token.size()) {
            while (i < token.size() && !is_alnum(token[i])) ++i;
            const std::size_t start = i;
            while (i < token.size() && is_alnum(token[i])) ++i;
            if (i > start) {
                std::vector<std::string> pieces;
                split_camel(std::string_view(token).substr(start, i - start), pieces);
                for (auto& piece : pieces) {
                    if (all_digits(piece)) continue;
                    words.push_back(text::to_lower(piece));
                }
            }
        }
    }
    return words;
}

IdfWeights::IdfWeights(std::map<std::string, double> weights) : weights_(std::move(weights)) {
    max_weight_ = 1.0;
    for (const auto& [token, w] : weights_) max_weight_ = std::max(max_weight_, w);
}

double IdfWeights::weight(const std::string& token) const {
    if (const auto it = weights_.find(token); it != weights_.end()) return it->second;
    return max_weight_;
}

IdfWeights build_idf(std::span<const parsing::LogTemplate> templates) {
    if (templates.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build IDF weights over zero templates");
    std::map<std::string, std::size_t> df;
    for (const auto& tmpl : templates) {
        const auto words = tokenize_template(tmpl);
        const std::set<std::string> unique(words.begin(), words.end());
        for (const auto& w : unique) ++df[w];
    }
    const double n = static_cast<double>(templates.size());
    std::map<std::string, double> weights;
    for (const auto& [word, count] : df) {
        weights[word] = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
    }
    return IdfWeights(std::move(weights));
}

double euclidean_norm(std::span<const double> v) {
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    return std::sqrt(sq);
}

EventEmbedding embed_event(const parsing::LogTemplate& tmpl, const WordVectorTable& table,
                           const IdfWeights& idf) {
    EventEmbedding out;
    out.template_id = tmpl.id;
    out.vector.assign(table.dimension(), 0.0);
    const auto words = tokenize_template(tmpl);
    if (words.empty()) {
        out.empty = true;
        return out;
    }
    double total = 0.0;
    for (const auto& word : words) {
        const double w = idf.weight(word);
        const Vector wv = table.lookup(word);
        for (std::size_t i = 0; i < wv.size(); ++i) out.vector[i] += w * wv[i];
        total += w;
    }
    for (auto& x : out.vector) x /= total;
    out.norm = euclidean_norm(out.vector);
    return out;
}

EmbeddingMap embed_templates(std::span<const parsing::LogTemplate> templates,
                             const WordVectorTable& table, EmbeddingReport* report) {
    const IdfWeights idf = build_idf(templates);
    EmbeddingMap out;
    for (const auto& tmpl : templates) {
        auto e = embed_event(tmpl, table, idf);
        if (e.empty && report != nullptr) report->empty_templates.push_back(tmpl.id);
        out.emplace(tmpl.id, std::move(e));
    }
    return out;
}

Vector embed_sequence(const LogSequence& seq, const EmbeddingMap& embeddings) {
    if (seq.template_ids.empty()) throw Error(ErrorCode::EmptySequence, "sequence '" + seq.id + "' is empty");
    Vector mean;
    for (const auto id : seq.template_ids) {
        const auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::UnknownTemplate, "template id " + std::to_string(id) + " in sequence '" +
                                                        seq.id + "' has no embedding");
        }
        if (mean.empty()) mean.assign(it->second.vector.size(), 0.0);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += it->second.vector[i];
    }
    const double n = static_cast<double>(seq.template_ids.size());
    for (auto& x : mean) x /= n;
    return mean;
}

void write_embeddings(std::ostream& out, const EmbeddingMap& embeddings) {
    std::vector<std::uint32_t> ids;
    ids.reserve(embeddings.size());
    for (const auto& [id, e] : embeddings) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (const auto id : ids) {
        out << id << '\t';
        const auto& v = embeddings.at(id).vector;
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << text::exact(v[i]);
        out << '\n';
    }
}

}  // namespace generallog::embedding
