#include "generallog/log_parsing.hpp"

#include "generallog/errors.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

namespace generallog::parsing {

std::string LogTemplate::text() const { return text::join(tokens, " "); }

std::size_t LogTemplate::wildcard_count() const {
    return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), kWildcard));
}

MaskRule MaskRule::compile(std::string pattern, std::string replacement) {
    try {
        std::regex regex(pattern, std::regex::ECMAScript);
        return MaskRule{std::move(pattern), std::move(replacement), std::move(regex)};
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::Config, "invalid mask pattern '" + pattern + "': " + e.what());
    }
}

std::string PreprocessedLine::content() const { return text::join(tokens, " "); }

LineFormat::LineFormat(std::string header_regex, std::vector<std::string> header_fields,
                       std::vector<MaskRule> masks)
    : header_pattern_(std::move(header_regex)), fields_(std::move(header_fields)),
      masks_(std::move(masks)) {
    if (header_pattern_.empty()) return;
    try {
        header_.emplace(header_pattern_, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::Config, "invalid header regex '" + header_pattern_ + "': " + e.what());
    }
    if (header_->mark_count() != fields_.size()) {
        throw Error(ErrorCode::Config, "header regex has " + std::to_string(header_->mark_count()) +
                                           " groups but " + std::to_string(fields_.size()) +
                                           " field names were given");
    }
    const auto it = std::find(fields_.begin(), fields_.end(), "content");
    if (it == fields_.end()) throw Error(ErrorCode::Config, "header fields must name a 'content' group");
    content_group_ = static_cast<std::size_t>(it - fields_.begin()) + 1;
}

PreprocessedLine LineFormat::apply(std::string_view raw, std::size_t line_number) const {
    const std::string where = " (line " + std::to_string(line_number) + ")";
    if (text::trim(raw).empty()) throw Error(ErrorCode::EmptyLine, "empty log line" + where);

    PreprocessedLine out;
    std::string_view content = raw;
    std::match_results<std::string_view::const_iterator> match;
    if (header_) {
        if (!std::regex_match(raw.begin(), raw.end(), match, *header_)) {
            throw Error(ErrorCode::MalformedHeader, "header does not match" + where);
        }
        for (std::size_t g = 1; g <= fields_.size(); ++g) {
            if (g == content_group_) continue;
            out.prefix_fields[fields_[g - 1]] = match[g].str();
        }
        const auto& group = match[content_group_];
        content = {};
        if (group.matched && group.length() > 0) {
            content = std::string_view(&*group.first, static_cast<std::size_t>(group.length()));
        }
    }

    out.raw_tokens = text::split_whitespace(content);
    if (out.raw_tokens.empty()) throw Error(ErrorCode::EmptyLine, "no message content" + where);
    out.tokens.reserve(out.raw_tokens.size());
    for (const auto& token : out.raw_tokens) {
        std::string masked = token;
        for (const auto& mask : masks_) masked = std::regex_replace(masked, mask.regex, mask.replacement);
        out.tokens.push_back(std::move(masked));
    }
    return out;
}

std::string preprocess_line(std::string_view raw, const LineFormat& format, std::size_t line_number) {
    return format.apply(raw, line_number).content();
}

double seq_similarity(std::span<const std::string> tokens, const LogTemplate& tmpl) {
    if (tokens.size() != tmpl.tokens.size()) {
        throw Error(ErrorCode::LengthMismatch, "sequence of " + std::to_string(tokens.size()) +
                                                   " tokens vs template of " +
                                                   std::to_string(tmpl.tokens.size()));
    }
    if (tokens.empty()) return 1.0;
    std::size_t same = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tmpl.tokens[i] == kWildcard || tmpl.tokens[i] == tokens[i]) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(tokens.size());
}

void ParserConfig::validate() const {
    if (depth < 3) throw Error(ErrorCode::Config, "parser depth must be >= 3");
    if (!(sim_threshold > 0.0 && sim_threshold <= 1.0)) {
        throw Error(ErrorCode::Config, "parser sim_threshold must lie in (0, 1]");
    }
    if (max_children < 2) throw Error(ErrorCode::Config, "parser max_children must be >= 2");
}

struct ParseTree::Node {
    std::map<std::string, std::unique_ptr<Node>> children;
    std::vector<std::uint32_t> group;  // template ids, leaves only
};

namespace {

bool has_digit(std::string_view token) {
    return std::any_of(token.begin(), token.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

std::string route_key(const std::string& token) {
    if (token == kWildcard || has_digit(token)) return std::string(kWildcard);
    return token;
}

std::size_t token_layers(const ParserConfig& config, std::size_t length) {
    return std::min(config.depth - 2, length);
}

}  // namespace

ParseTree::ParseTree(ParserConfig config) : config_(config) { config_.validate(); }

ParseTree::~ParseTree() = default;

const ParseTree::Node* ParseTree::find_leaf(std::span<const std::string> tokens) const {
    const auto root = by_length_.find(tokens.size());
    if (root == by_length_.end()) return nullptr;
    const Node* node = root->second.get();
    for (std::size_t layer = 0; layer < token_layers(config_, tokens.size()); ++layer) {
        auto it = node->children.find(route_key(tokens[layer]));
        if (it == node->children.end()) it = node->children.find(std::string(kWildcard));
        if (it == node->children.end()) return nullptr;
        node = it->second.get();
    }
    return node;
}

ParseTree::Node& ParseTree::descend_or_create(std::span<const std::string> tokens) {
    auto& root = by_length_[tokens.size()];
    if (!root) root = std::make_unique<Node>();
    Node* node = root.get();
    const std::string wildcard(kWildcard);
    for (std::size_t layer = 0; layer < token_layers(config_, tokens.size()); ++layer) {
        const std::string key = route_key(tokens[layer]);
        auto it = node->children.find(key);
        if (it == node->children.end()) {
            // The last free slot is reserved for the overflow child.
            const bool has_wildcard = node->children.count(wildcard) > 0;
            const std::size_t room = config_.max_children - (has_wildcard ? 0 : 1);
            const std::string& slot = (node->children.size() < room) ? key : wildcard;
            auto& child = node->children[slot];
            if (!child) child = std::make_unique<Node>();
            node = child.get();
        } else {
            node = it->second.get();
        }
    }
    return *node;
}

std::optional<std::uint32_t> ParseTree::best_in(const Node& leaf,
                                                std::span<const std::string> tokens) const {
    std::optional<std::uint32_t> best;
    double best_sim = -1.0;
    std::size_t best_wild = 0;
    for (const auto id : leaf.group) {
        const auto& tmpl = at(id);
        const double sim = seq_similarity(tokens, tmpl);
        const std::size_t wild = tmpl.wildcard_count();
        if (sim > best_sim || (sim == best_sim && wild > best_wild)) {
            best = id;
            best_sim = sim;
            best_wild = wild;
        }
    }
    if (best && best_sim >= config_.sim_threshold) return best;
    return std::nullopt;
}

std::uint32_t ParseTree::insert(std::span<const std::string> tokens) {
    if (tokens.empty()) throw Error(ErrorCode::InvalidArgument, "cannot insert an empty token list");
    Node& leaf = descend_or_create(tokens);
    if (const auto hit = best_in(leaf, tokens)) {
        auto& tmpl = templates_[*hit - config_.first_id];
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tmpl.tokens[i] != tokens[i]) tmpl.tokens[i] = std::string(kWildcard);
        }
        ++tmpl.occurrence_count;
        return tmpl.id;
    }
    const auto id = config_.first_id + static_cast<std::uint32_t>(templates_.size());
    templates_.push_back(LogTemplate{id, {tokens.begin(), tokens.end()}, 1});
    leaf.group.push_back(id);
    return id;
}

std::optional<std::uint32_t> ParseTree::match(std::span<const std::string> tokens) const {
    if (tokens.empty()) return std::nullopt;
    const Node* leaf = find_leaf(tokens);
    if (leaf == nullptr) return std::nullopt;
    return best_in(*leaf, tokens);
}

const LogTemplate& ParseTree::at(std::uint32_t id) const {
    if (id < config_.first_id || id - config_.first_id >= templates_.size()) {
        throw Error(ErrorCode::UnknownTemplate, "template id " + std::to_string(id));
    }
    return templates_[id - config_.first_id];
}

std::size_t ParseTree::widest_node() const {
    std::size_t widest = 0;
    std::vector<const Node*> stack;
    for (const auto& [length, root] : by_length_) stack.push_back(root.get());
    while (!stack.empty()) {
        const Node* node = stack.back();
        stack.pop_back();
        widest = std::max(widest, node->children.size());
        for (const auto& [key, child] : node->children) stack.push_back(child.get());
    }
    return widest;
}

ParseResult parse_stream(std::span<const std::string> lines, const ParserConfig& config,
                         const LineFormat& format) {
    ParseTree tree(config);
    ParseResult result;
    std::vector<std::vector<std::string>> raw_tokens;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_number = i + 1;
        ++result.report.lines_read;
        PreprocessedLine pre;
        try {
            pre = format.apply(lines[i], line_number);
        } catch (const Error& e) {
            result.report.skipped.push_back({line_number, e.what()});
            continue;
        }
        const auto id = tree.insert(pre.tokens);
        result.events.push_back(ParsedEvent{line_number, id, {}, std::move(pre.prefix_fields)});
        raw_tokens.push_back(std::move(pre.raw_tokens));
        ++result.report.lines_parsed;
    }
    for (std::size_t e = 0; e < result.events.size(); ++e) {
        auto& event = result.events[e];
        const auto& tmpl = tree.at(event.template_id);
        for (std::size_t pos = 0; pos < tmpl.tokens.size(); ++pos) {
            if (tmpl.tokens[pos] == kWildcard) event.parameters.push_back(raw_tokens[e][pos]);
        }
    }
    result.templates = tree.templates();
    return result;
}

void write_templates(std::ostream& out, std::span<const LogTemplate> templates) {
    for (const auto& t : templates) out << t.id << '\t' << t.text() << '\n';
}

void write_events(std::ostream& out, std::span<const ParsedEvent> events) {
    for (const auto& e : events) {
        out << e.line_number << '\t' << e.template_id << '\t' << text::join(e.parameters, "\x1f") << '\n';
    }
}

std::vector<LogTemplate> read_templates(std::istream& in) {
    std::vector<LogTemplate> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (text::trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::Io, "templates file line " + std::to_string(line_number) + " has no tab");
        }
        LogTemplate t;
        t.id = static_cast<std::uint32_t>(text::parse_int(std::string_view(line).substr(0, tab)));
        t.tokens = text::split_whitespace(std::string_view(line).substr(tab + 1));
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace generallog::parsing
