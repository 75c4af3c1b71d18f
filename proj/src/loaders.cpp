#include "generallog/loaders.hpp"

#include "generallog/errors.hpp"
#include "generallog/text.hpp"

#include <map>

namespace generallog::loaders {

namespace {

int label_value(const std::string& raw, std::size_t line_number) {
    const auto v = text::to_lower(text::trim(raw));
    if (v == "anomaly" || v == "1") return 1;
    if (v == "normal" || v == "0") return 0;
    throw Error(ErrorCode::Io, "label file line " + std::to_string(line_number) + ": unknown label '" + raw + "'");
}

}  // namespace

LabelTable parse_labels(std::span<const std::string> lines) {
    LabelTable table;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = text::trim(lines[i]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 2) {
            throw Error(ErrorCode::Io, "label file line " + std::to_string(i + 1) + ": expected key,Label");
        }
        if (i == 0 && text::to_lower(text::trim(fields[1])) == "label") continue;
        table[std::string(text::trim(fields[0]))] = label_value(fields[1], i + 1);
    }
    return table;
}

LabelTable read_labels(const std::filesystem::path& path) {
    const auto lines = text::read_lines(path);
    return parse_labels(lines);
}

LoadedCorpus load_sessions(std::span<const std::string> lines, const std::string& system,
                           const parsing::LineFormat& format, const parsing::ParserConfig& parser,
                           const std::regex& session_key, const LabelTable* labels) {
    auto parsed = parsing::parse_stream(lines, parser, format);
    LoadedCorpus out;
    out.templates = std::move(parsed.templates);
    out.report.lines_read = parsed.report.lines_read;
    out.report.lines_parsed = parsed.report.lines_parsed;
    out.report.skipped = std::move(parsed.report.skipped);

    std::map<std::string, std::size_t> slot;
    for (const auto& event : parsed.events) {
        const auto& raw = lines[event.line_number - 1];
        std::smatch m;
        if (!std::regex_search(raw, m, session_key)) {
            ++out.report.lines_without_key;
            continue;
        }
        const std::string key = m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
        auto [it, fresh] = slot.try_emplace(key, out.sequences.size());
        if (fresh) out.sequences.push_back(LogSequence{key, {}, system, std::nullopt});
        out.sequences[it->second].template_ids.push_back(event.template_id);
    }

    if (labels != nullptr) {
        std::vector<LogSequence> kept;
        for (auto& seq : out.sequences) {
            const auto it = labels->find(seq.id);
            if (it == labels->end()) {
                out.report.unlabeled.push_back(seq.id);
                continue;
            }
            seq.truth_label = it->second;
            kept.push_back(std::move(seq));
        }
        out.sequences = std::move(kept);
    }
    return out;
}

std::vector<parsing::MaskRule> default_masks() {
    return {
        parsing::MaskRule::compile(R"(blk_-?\d+)", "<*>"),
        parsing::MaskRule::compile(R"(/?(\d{1,3}\.){3}\d{1,3}(:\d+)?)", "<*>"),
        parsing::MaskRule::compile(R"(0x[0-9a-fA-F]+)", "<*>"),
        parsing::MaskRule::compile(R"(^[-+]?\d+(\.\d+)?$)", "<*>"),
    };
}

parsing::LineFormat hdfs_format() {
    return parsing::LineFormat(R"(^(\d+) (\d+) (\d+) (\w+) ([^:]+): (.*)$)",
                               {"date", "time", "pid", "level", "component", "content"}, default_masks());
}

LoadedCorpus load_hdfs(const std::filesystem::path& log_path, const std::filesystem::path& labels_path,
                       const parsing::ParserConfig& parser) {
    const auto lines = text::read_lines(log_path);
    const std::regex key(kHdfsSessionRegex);
    if (labels_path.empty()) return load_sessions(lines, "HDFS", hdfs_format(), parser, key, nullptr);
    const auto labels = read_labels(labels_path);
    return load_sessions(lines, "HDFS", hdfs_format(), parser, key, &labels);
}

std::vector<Window> plan_windows(std::size_t count, std::size_t size, std::size_t stride, std::size_t* dropped) {
    if (size == 0 || stride == 0) throw Error(ErrorCode::InvalidArgument, "window size and stride must be >= 1");
    std::vector<Window> out;
    for (std::size_t begin = 0; begin < count; begin += stride) {
        const std::size_t end = std::min(begin + size, count);
        if (2 * (end - begin) >= size) {
            out.push_back({begin, end});
        } else if (dropped != nullptr) {
            ++*dropped;
        }
        if (end == count) break;
    }
    return out;
}

parsing::LineFormat bgl_format() {
    return parsing::LineFormat(R"(^(\S+) (\S+) (\S+) (\S+) (\S+) (\S+) (\S+) (\S+) (\S+) (.*)$)",
                               {"label", "timestamp", "date", "node", "time", "node_repeat", "type", "component",
                                "level", "content"},
                               default_masks());
}

LoadedCorpus load_bgl_lines(std::span<const std::string> lines, const std::string& system,
                            const parsing::LineFormat& format, const parsing::ParserConfig& parser,
                            std::size_t window, std::size_t stride) {
    auto parsed = parsing::parse_stream(lines, parser, format);
    if (parsed.events.empty()) throw Error(ErrorCode::EmptyCorpus, "no parseable lines in the BGL log");
    LoadedCorpus out;
    out.templates = std::move(parsed.templates);
    out.report.lines_read = parsed.report.lines_read;
    out.report.lines_parsed = parsed.report.lines_parsed;
    out.report.skipped = std::move(parsed.report.skipped);

    const auto windows = plan_windows(parsed.events.size(), window, stride, &out.report.windows_dropped);
    for (const auto& w : windows) {
        LogSequence seq{system + "-w" + std::to_string(w.begin), {}, system, 0};
        for (std::size_t i = w.begin; i < w.end; ++i) {
            const auto& event = parsed.events[i];
            seq.template_ids.push_back(event.template_id);
            const auto fields = text::split_whitespace(lines[event.line_number - 1]);
            if (fields.front() != "-") seq.truth_label = 1;
        }
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

LoadedCorpus load_bgl(const std::filesystem::path& log_path, const parsing::ParserConfig& parser,
                      std::size_t window, std::size_t stride) {
    const auto lines = text::read_lines(log_path);
    return load_bgl_lines(lines, "BGL", bgl_format(), parser, window, stride);
}

}  // namespace generallog::loaders
