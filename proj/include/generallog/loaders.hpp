#pragma once

#include "generallog/log_parsing.hpp"
#include "generallog/log_sequence.hpp"

#include <filesystem>
#include <regex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace generallog::loaders {

/// Session key -> 0 (Normal) or 1 (Anomaly).
using LabelTable = std::unordered_map<std::string, int>;

/// Two-column CSV `key,Label` with an optional header row. Labels are
/// Normal/Anomaly (any case) or 0/1. Throws Error(Io).
LabelTable parse_labels(std::span<const std::string> lines);
LabelTable read_labels(const std::filesystem::path& path);

struct LoadReport {
    std::size_t lines_read = 0;
    std::size_t lines_parsed = 0;
    std::size_t lines_without_key = 0;
    std::vector<parsing::SkippedLine> skipped;
    std::vector<std::string> unlabeled;  // sessions absent from the label table, excluded
    std::size_t windows_dropped = 0;
};

struct LoadedCorpus {
    std::vector<LogSequence> sequences;
    std::vector<parsing::LogTemplate> templates;
    LoadReport report;
};

/// Parses every line, then groups events by the session key found in the
/// raw line (first capture group, or the whole match), in order of first
/// appearance. With a label table, unlabeled sessions are reported and
/// dropped; without one, sequences carry no truth label.
LoadedCorpus load_sessions(std::span<const std::string> lines, const std::string& system,
                           const parsing::LineFormat& format, const parsing::ParserConfig& parser,
                           const std::regex& session_key, const LabelTable* labels);

/// Masks shared by the built-in formats: block ids, IPv4 addresses with
/// optional port, hex literals and bare numbers.
std::vector<parsing::MaskRule> default_masks();

parsing::LineFormat hdfs_format();
inline constexpr const char* kHdfsSessionRegex = R"(blk_-?[0-9]+)";

/// Sessions keyed by block id. `labels_path` may be empty for unlabeled logs.
LoadedCorpus load_hdfs(const std::filesystem::path& log_path, const std::filesystem::path& labels_path,
                       const parsing::ParserConfig& parser);

struct Window {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

/// Windows start at multiples of `stride`; a trailing partial window is kept
/// when it holds at least half of `size` events, and counted in `dropped`
/// otherwise. Throws Error(InvalidArgument) for zero size or stride.
std::vector<Window> plan_windows(std::size_t count, std::size_t size, std::size_t stride, std::size_t* dropped);

parsing::LineFormat bgl_format();

/// Each line's first field is "-" for normal lines or an alert tag; a window
/// is anomalous when any member line is. Throws Error(EmptyCorpus).
LoadedCorpus load_bgl_lines(std::span<const std::string> lines, const std::string& system,
                            const parsing::LineFormat& format, const parsing::ParserConfig& parser,
                            std::size_t window, std::size_t stride);
LoadedCorpus load_bgl(const std::filesystem::path& log_path, const parsing::ParserConfig& parser,
                      std::size_t window = 100, std::size_t stride = 100);

}  // namespace generallog::loaders
