#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace generallog::parsing {

inline constexpr std::string_view kWildcard = "<*>";

/// A mined event template. `id` never changes once assigned, even as more
/// positions generalize to the wildcard.
struct LogTemplate {
    std::uint32_t id = 0;
    std::vector<std::string> tokens;
    std::uint64_t occurrence_count = 0;

    [[nodiscard]] std::string text() const;
    [[nodiscard]] std::size_t wildcard_count() const;
};

struct MaskRule {
    std::string pattern;
    std::string replacement;
    std::regex regex;

    /// Throws Error(Config) when the pattern does not compile.
    static MaskRule compile(std::string pattern, std::string replacement);
};

struct PreprocessedLine {
    std::vector<std::string> tokens;      // masked
    std::vector<std::string> raw_tokens;  // same length, before masking
    std::map<std::string, std::string> prefix_fields;

    [[nodiscard]] std::string content() const;
};

/// Header layout plus variable masks for one log source.
///
/// The header regex must match the whole line; its capture groups are named,
/// in order, by `header_fields`, one of which must be "content". With an empty
/// regex the whole line is content. Masks are applied in order to every
/// whitespace-delimited token of the content.
class LineFormat {
public:
    LineFormat() = default;
    LineFormat(std::string header_regex, std::vector<std::string> header_fields,
               std::vector<MaskRule> masks);

    /// Throws Error(EmptyLine) or Error(MalformedHeader); both carry the line number.
    [[nodiscard]] PreprocessedLine apply(std::string_view raw, std::size_t line_number = 0) const;

    [[nodiscard]] const std::string& header_regex() const { return header_pattern_; }
    [[nodiscard]] const std::vector<std::string>& header_fields() const { return fields_; }
    [[nodiscard]] const std::vector<MaskRule>& masks() const { return masks_; }

private:
    std::string header_pattern_;
    std::optional<std::regex> header_;
    std::vector<std::string> fields_;
    std::size_t content_group_ = 0;
    std::vector<MaskRule> masks_;
};

/// Header-stripped, masked message content with tokens joined by single spaces.
std::string preprocess_line(std::string_view raw, const LineFormat& format,
                            std::size_t line_number = 0);

/// Fraction of positions where `tokens` equals the template token; a template
/// wildcard matches anything. Throws Error(LengthMismatch).
double seq_similarity(std::span<const std::string> tokens, const LogTemplate& tmpl);

struct ParserConfig {
    std::size_t depth = 4;  // root + length layer + (depth - 2) token layers
    double sim_threshold = 0.4;
    std::size_t max_children = 100;
    std::uint32_t first_id = 0;

    void validate() const;
};

/// Drain-style fixed-depth parse tree. Single writer.
class ParseTree {
public:
    explicit ParseTree(ParserConfig config = {});
    ParseTree(ParseTree&&) noexcept = default;
    ParseTree& operator=(ParseTree&&) noexcept = default;
    ~ParseTree();

    /// Match-or-create; returns the template id the tokens were assigned to.
    std::uint32_t insert(std::span<const std::string> tokens);

    /// Best matching template in the tokens' leaf group at or above the
    /// threshold, without mutating anything.
    [[nodiscard]] std::optional<std::uint32_t> match(std::span<const std::string> tokens) const;

    [[nodiscard]] const LogTemplate& at(std::uint32_t id) const;
    [[nodiscard]] const std::vector<LogTemplate>& templates() const { return templates_; }
    [[nodiscard]] const ParserConfig& config() const { return config_; }

    /// Largest child count over all token-layer nodes.
    [[nodiscard]] std::size_t widest_node() const;

private:
    struct Node;

    [[nodiscard]] const Node* find_leaf(std::span<const std::string> tokens) const;
    Node& descend_or_create(std::span<const std::string> tokens);
    [[nodiscard]] std::optional<std::uint32_t> best_in(const Node& leaf,
                                                       std::span<const std::string> tokens) const;

    ParserConfig config_;
    std::map<std::size_t, std::unique_ptr<Node>> by_length_;
    std::vector<LogTemplate> templates_;
};

struct ParsedEvent {
    std::size_t line_number = 0;  // 1-based
    std::uint32_t template_id = 0;
    std::vector<std::string> parameters;
    std::map<std::string, std::string> raw_prefix_fields;
};

struct SkippedLine {
    std::size_t line_number = 0;
    std::string reason;
};

struct ParseReport {
    std::size_t lines_read = 0;
    std::size_t lines_parsed = 0;
    std::vector<SkippedLine> skipped;
};

struct ParseResult {
    std::vector<ParsedEvent> events;
    std::vector<LogTemplate> templates;
    ParseReport report;
};

/// Parses every line; bad lines are counted in the report, never fatal.
/// Event parameters are taken at the final template's wildcard positions.
ParseResult parse_stream(std::span<const std::string> lines, const ParserConfig& config,
                         const LineFormat& format);

void write_templates(std::ostream& out, std::span<const LogTemplate> templates);
void write_events(std::ostream& out, std::span<const ParsedEvent> events);
std::vector<LogTemplate> read_templates(std::istream& in);

}  // namespace generallog::parsing
