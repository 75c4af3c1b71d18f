#include "generallog/rag_pipeline.hpp"

#include "generallog/errors.hpp"
#include "generallog/semantic_router.hpp"
#include "generallog/text.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

namespace generallog::rag {

namespace {

constexpr std::string_view kNeighborPrefix = "similarity=";
constexpr std::string_view kClosingLine = "Answer with exactly one word: NORMAL or ANOMALY.";

std::string label_word(int label) { return label == 1 ? "ANOMALY" : "NORMAL"; }

std::string escape_field(std::string_view raw) {
    std::string out;
    for (const char c : raw) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_field(std::string_view raw) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '\\' || i + 1 == raw.size()) {
            out += raw[i];
            continue;
        }
        const char next = raw[++i];
        out += next == 't' ? '\t' : next == 'n' ? '\n' : next;
    }
    return out;
}

// Case-insensitive verdict word, or -1.
int verdict_word(std::string_view word) {
    const auto upper = text::to_upper(word);
    if (upper == "ANOMALY") return 1;
    if (upper == "NORMAL") return 0;
    return -1;
}

}  // namespace

KnowledgeBase build_kb(std::span<const LogSequence> general, std::span<const training::Prediction> predictions,
                       const embedding::EmbeddingMap& embeddings, const TemplateCatalog& catalog) {
    if (general.size() != predictions.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(general.size()) + " sequences but " +
                                                   std::to_string(predictions.size()) + " predictions");
    }
    KnowledgeBase kb;
    for (std::size_t i = 0; i < general.size(); ++i) {
        const auto& p = predictions[i];
        if (p.probability >= kLowConfidence && p.probability <= kHighConfidence) {
            ++kb.excluded;
            continue;
        }
        KbEntry entry;
        entry.sequence_id = general[i].id;
        entry.embedding = embedding::embed_sequence(general[i], embeddings);
        entry.norm = embedding::euclidean_norm(entry.embedding);
        entry.rendered_text = render_sequence(general[i], catalog);
        entry.predicted_label = p.label;
        entry.confidence = p.probability;
        kb.entries.push_back(std::move(entry));
    }
    return kb;
}

std::vector<Neighbor> retrieve(const KnowledgeBase& kb, std::span<const double> query, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "retrieval depth k must be >= 1");
    std::vector<Neighbor> all;
    all.reserve(kb.entries.size());
    for (std::size_t i = 0; i < kb.entries.size(); ++i) {
        all.push_back({i, routing::cosine(query, kb.entries[i].embedding)});
    }
    const auto better = [&kb](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return kb.entries[a.index].sequence_id < kb.entries[b.index].sequence_id;
    };
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
    all.resize(keep);
    return all;
}

std::string build_prompt(const std::string& target_text, const KnowledgeBase& kb, std::span<const Neighbor> neighbors) {
    std::ostringstream out;
    out << "You are reviewing logs from a software system. Decide whether the target log sequence is NORMAL "
           "or an ANOMALY.\n"
        << "A sequence lists its log templates in order, separated by \" | \".\n\n"
        << "Reference examples from the same system, labeled by a detector trained on related systems:\n";
    if (neighbors.empty()) out << "No reference examples available.\n";
    for (const auto& n : neighbors) {
        const auto& e = kb.entries.at(n.index);
        out << kNeighborPrefix << text::fixed(n.similarity, 6) << " label=" << label_word(e.predicted_label)
            << " text=" << e.rendered_text << '\n';
    }
    out << "\nTarget sequence:\n" << target_text << "\n\n" << kClosingLine << '\n';
    return out.str();
}

int parse_verdict(const std::string& response) {
    std::string last;
    for (const auto& line : text::split(response, '\n')) {
        if (!text::trim(line).empty()) last = line;
    }
    std::string stripped;
    for (const char c : last) {
        if (!std::ispunct(static_cast<unsigned char>(c))) stripped += c;
    }
    if (const int v = verdict_word(text::trim(stripped)); v >= 0) return v;

    std::string word;
    for (std::size_t i = 0; i <= response.size(); ++i) {
        const char c = i < response.size() ? response[i] : ' ';
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += c;
            continue;
        }
        if (const int v = verdict_word(word); v >= 0) return v;
        word.clear();
    }
    throw Error(ErrorCode::UnparseableVerdict, "no NORMAL/ANOMALY verdict in response: " + response);
}

std::string mock_llm(const std::string& prompt) {
    struct Listed {
        double similarity;
        int label;
    };
    std::vector<Listed> listed;
    for (const auto& line : text::split(prompt, '\n')) {
        if (line.rfind(kNeighborPrefix, 0) != 0) continue;
        const auto label_at = line.find(" label=");
        const auto text_at = line.find(" text=");
        if (label_at == std::string::npos || text_at == std::string::npos || text_at < label_at) {
            return "MALFORMED PROMPT";
        }
        double sim = 0.0;
        try {
            sim = text::parse_double(line.substr(kNeighborPrefix.size(), label_at - kNeighborPrefix.size()));
        } catch (const Error&) {
            return "MALFORMED PROMPT";
        }
        const int label = verdict_word(line.substr(label_at + 7, text_at - label_at - 7));
        if (label < 0) return "MALFORMED PROMPT";
        listed.push_back({sim, label});
    }
    if (listed.empty()) return "ANOMALY";
    double best = listed.front().similarity;
    for (const auto& l : listed) best = std::max(best, l.similarity);
    int anomalies = 0, normals = 0;
    for (const auto& l : listed) {
        if (l.similarity != best) continue;
        (l.label == 1 ? anomalies : normals)++;
    }
    return normals > anomalies ? "NORMAL" : "ANOMALY";
}

void LlmClientConfig::validate() const {
    static const std::regex url(R"(^https?://[^/\s]+(/\S*)?$)");
    if (!std::regex_match(endpoint, url)) {
        throw Error(ErrorCode::Config, "llm.endpoint must be an http(s) URL, got '" + endpoint + "'");
    }
    if (model.empty()) throw Error(ErrorCode::Config, "llm.model must be set");
    if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::Config, "llm.timeout_seconds must be > 0");
}

HttpLlmClient::HttpLlmClient(LlmClientConfig config) : config_(std::move(config)) {
    config_.validate();
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    std::regex_match(config_.endpoint, m, url);
    base_ = m[1].str();
    path_ = m[2].matched && m[2].length() > 0 ? m[2].str() : "/v1/chat/completions";
}

std::string HttpLlmClient::request_body(const std::string& prompt) const {
    const nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0},
    };
    return body.dump();
}

std::string HttpLlmClient::complete(const std::string& prompt) {
    httplib::Client client(base_);
    const auto whole = static_cast<time_t>(config_.timeout_seconds);
    const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    const auto res = client.Post(path_, headers, request_body(prompt), "application/json");
    if (!res) {
        throw Error(ErrorCode::Transport, "request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::Transport, "endpoint answered HTTP " + std::to_string(res->status));
    }
    try {
        const auto body = nlohmann::json::parse(res->body);
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Transport, std::string("unexpected response body: ") + e.what());
    }
}

Verdict detect_proprietary(const LogSequence& seq, const KnowledgeBase& kb, LlmClient& client,
                           const embedding::EmbeddingMap& embeddings, const TemplateCatalog& catalog,
                           std::size_t k) {
    Verdict v;
    v.sequence_id = seq.id;
    v.source = std::string(client.name());
    std::string prompt;
    try {
        const auto query = embedding::embed_sequence(seq, embeddings);
        const auto neighbors = retrieve(kb, query, k);
        for (const auto& n : neighbors) v.neighbors_used.emplace_back(kb.entries[n.index].sequence_id, n.similarity);
        prompt = build_prompt(render_sequence(seq, catalog), kb, neighbors);
    } catch (const Error& e) {
        v.flagged = true;
        v.note = e.what();
        return v;
    }

    const std::size_t attempts = 1 + client.max_retries();
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        ++v.calls;
        try {
            v.raw_response = client.complete(prompt);
            v.label = parse_verdict(v.raw_response);
            v.flagged = false;
            v.note.clear();
            return v;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport && e.code() != ErrorCode::UnparseableVerdict) throw;
            v.flagged = true;
            v.note = e.what();
        }
    }
    v.label = 1;
    return v;
}

void write_kb(std::ostream& out, const KnowledgeBase& kb) {
    for (const auto& e : kb.entries) {
        out << escape_field(e.sequence_id) << '\t' << e.predicted_label << '\t' << text::fixed(e.confidence, 6) << '\t';
        for (std::size_t i = 0; i < e.embedding.size(); ++i) out << (i ? " " : "") << text::exact(e.embedding[i]);
        out << '\t' << escape_field(e.rendered_text) << '\n';
    }
}

KnowledgeBase read_kb(std::istream& in) {
    KnowledgeBase kb;
    std::string line;
    std::size_t line_number = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = text::split(line, '\t');
        const auto bad = [&](const std::string& what) {
            return Error(ErrorCode::Io, "knowledge base line " + std::to_string(line_number) + ": " + what);
        };
        if (fields.size() != 5) throw bad("expected 5 tab-separated fields");
        KbEntry e;
        e.sequence_id = unescape_field(fields[0]);
        try {
            const auto label = text::parse_int(fields[1]);
            if (label != 0 && label != 1) throw bad("label must be 0 or 1");
            e.predicted_label = static_cast<int>(label);
            e.confidence = text::parse_double(fields[2]);
            for (const auto& tok : text::split_whitespace(fields[3])) e.embedding.push_back(text::parse_double(tok));
        } catch (const Error& err) {
            if (err.code() == ErrorCode::Io) throw;
            throw bad(err.what());
        }
        if (e.embedding.empty()) throw bad("empty vector");
        if (dim == 0) dim = e.embedding.size();
        if (e.embedding.size() != dim) throw bad("vector dimension differs from earlier entries");
        e.norm = embedding::euclidean_norm(e.embedding);
        e.rendered_text = unescape_field(fields[4]);
        kb.entries.push_back(std::move(e));
    }
    return kb;
}

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb) {
    std::ostringstream out;
    write_kb(out, kb);
    text::write_file(path, out.str());
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open knowledge base " + path.string());
    return read_kb(in);
}

}  // namespace generallog::rag
