#include <doctest.h>

#include "generallog/errors.hpp"
#include "generallog/log_parsing.hpp"
#include "generallog/random.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <sstream>

using namespace generallog;
using namespace generallog::parsing;

namespace {

LineFormat hdfs_masks() {
    return LineFormat("", {},
                      {MaskRule::compile(R"(blk_-?\d+)", "<*>"),
                       MaskRule::compile(R"(^/?(\d+\.){3}\d+(:\d+)?$)", "<*>"),
                       MaskRule::compile(R"(^-?\d+$)", "<*>")});
}

std::vector<std::string> toks(std::string_view s) { return text::split_whitespace(s); }

// Brute-force match-or-create over every stored template of the same length,
// ignoring the tree entirely. Same tie rule: higher similarity, then more
// wildcards, then the earlier template.
struct BruteForceMiner {
    double threshold;
    std::vector<std::vector<std::string>> templates;

    std::size_t insert(const std::vector<std::string>& tokens) {
        std::optional<std::size_t> best;
        double best_sim = -1.0;
        std::size_t best_wild = 0;
        for (std::size_t k = 0; k < templates.size(); ++k) {
            const auto& t = templates[k];
            if (t.size() != tokens.size()) continue;
            std::size_t same = 0, wild = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (t[i] == "<*>") ++wild;
                if (t[i] == "<*>" || t[i] == tokens[i]) ++same;
            }
            const double sim = static_cast<double>(same) / static_cast<double>(t.size());
            if (sim > best_sim || (sim == best_sim && wild > best_wild)) {
                best = k;
                best_sim = sim;
                best_wild = wild;
            }
        }
        if (best && best_sim >= threshold) {
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                if (templates[*best][i] != tokens[i]) templates[*best][i] = "<*>";
            }
            return *best;
        }
        templates.push_back(tokens);
        return templates.size() - 1;
    }
};

}  // namespace

TEST_CASE("preprocess_line masks block ids and addresses") {
    CHECK(preprocess_line("Receiving block blk_123 src: /10.0.0.1:50010", hdfs_masks()) ==
          "Receiving block <*> src: <*>");
    CHECK(preprocess_line("job 77 timed out", LineFormat("", {}, {MaskRule::compile(R"(^\d+$)", "<*>")})) ==
          "job <*> timed out");
}

TEST_CASE("preprocess_line rejects empty lines and malformed headers") {
    try {
        (void)preprocess_line("", hdfs_masks(), 12);
        FAIL("expected EmptyLine");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyLine);
        CHECK(std::string(e.what()).find("line 12") != std::string::npos);
    }
    const LineFormat with_header(R"(^(\d{6}) (\d{6}) (\w+) (.*)$)", {"date", "time", "level", "content"}, {});
    CHECK_THROWS_AS((void)preprocess_line("garbage without header", with_header, 3), Error);
    const auto pre = with_header.apply("081109 203615 INFO PacketResponder 1 terminating", 1);
    CHECK(pre.content() == "PacketResponder 1 terminating");
    CHECK(pre.prefix_fields.at("level") == "INFO");
    CHECK(pre.prefix_fields.at("date") == "081109");
}

TEST_CASE("header regex needs one name per group and a content group") {
    CHECK_THROWS_AS(LineFormat(R"(^(\w+) (.*)$)", {"content"}, {}), Error);
    CHECK_THROWS_AS(LineFormat(R"(^(\w+) (.*)$)", {"a", "b"}, {}), Error);
    CHECK_THROWS_AS(MaskRule::compile("([unclosed", "<*>"), Error);
}

TEST_CASE("seq_similarity counts wildcard positions as matches") {
    const LogTemplate send{0, {"send", "data", "<*>"}, 1};
    CHECK(seq_similarity(toks("send data 5"), send) == 1.0);
    CHECK(seq_similarity(toks("a b"), LogTemplate{0, {"a", "c"}, 1}) == 0.5);
    try {
        (void)seq_similarity(toks("a"), LogTemplate{0, {"a", "b"}, 1});
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
}

TEST_CASE("insert is match-or-create") {
    ParserConfig cfg;
    cfg.sim_threshold = 0.5;

    SUBCASE("identical token lists share an id") {
        ParseTree tree(cfg);
        const auto a = tree.insert(toks("connection closed by peer"));
        const auto b = tree.insert(toks("connection closed by peer"));
        CHECK(a == b);
        CHECK(tree.at(a).occurrence_count == 2);
    }
    SUBCASE("one differing position generalizes at threshold 0.5") {
        ParseTree tree(cfg);
        BruteForceMiner oracle{0.5, {}};
        const auto a = tree.insert(toks("send 5"));
        const auto b = tree.insert(toks("send 6"));
        CHECK(oracle.insert(toks("send 5")) == oracle.insert(toks("send 6")));
        CHECK(a == b);
        CHECK(tree.at(a).tokens == oracle.templates[0]);
        CHECK(tree.at(a).text() == "send <*>");
    }
    SUBCASE("different leading tokens create distinct templates") {
        ParseTree tree(cfg);
        BruteForceMiner oracle{0.5, {}};
        CHECK(tree.insert(toks("send 5")) != tree.insert(toks("recv 6")));
        CHECK(oracle.insert(toks("send 5")) != oracle.insert(toks("recv 6")));
    }
    SUBCASE("empty token list is rejected") {
        ParseTree tree(cfg);
        CHECK_THROWS_AS(tree.insert(std::vector<std::string>{}), Error);
    }
}

TEST_CASE("parser config is validated") {
    CHECK_THROWS_AS(ParseTree(ParserConfig{2, 0.4, 100, 0}), Error);
    CHECK_THROWS_AS(ParseTree(ParserConfig{4, 0.0, 100, 0}), Error);
    CHECK_THROWS_AS(ParseTree(ParserConfig{4, 1.5, 100, 0}), Error);
    CHECK_THROWS_AS(ParseTree(ParserConfig{4, 0.4, 1, 0}), Error);
}

TEST_CASE("parse_stream edge cases") {
    const ParserConfig cfg;
    SUBCASE("no lines") {
        const auto result = parse_stream({}, cfg, hdfs_masks());
        CHECK(result.events.empty());
        CHECK(result.templates.empty());
    }
    SUBCASE("a thousand copies of one line") {
        const std::vector<std::string> lines(1000, "Receiving block blk_99 src: /10.0.0.2:50010");
        const auto result = parse_stream(lines, cfg, hdfs_masks());
        CHECK(result.events.size() == 1000);
        REQUIRE(result.templates.size() == 1);
        CHECK(result.templates[0].occurrence_count == 1000);
    }
    SUBCASE("bad lines are counted, not fatal") {
        const std::vector<std::string> lines{"ok line here", "", "   ", "another ok line"};
        const auto result = parse_stream(lines, cfg, hdfs_masks());
        CHECK(result.events.size() == 2);
        CHECK(result.report.skipped.size() == 2);
        CHECK(result.report.skipped[0].line_number == 2);
        CHECK(result.events[1].line_number == 4);
    }
}

TEST_CASE("six-line fixture matches the brute-force clustering oracle") {
    const std::vector<std::string> lines{
        "Receiving block blk_1 src: /10.0.0.1:1 dest: /10.0.0.2:2",
        "PacketResponder 1 for block blk_1 terminating",
        "Receiving block blk_2 src: /10.0.0.3:1 dest: /10.0.0.4:2",
        "Verification succeeded for blk_7",
        "PacketResponder 0 for block blk_2 terminating",
        "Deleting block blk_3 file /data/current/blk_3",
    };
    ParserConfig cfg;
    cfg.sim_threshold = 0.4;
    const auto format = hdfs_masks();
    const auto result = parse_stream(lines, cfg, format);

    BruteForceMiner oracle{0.4, {}};
    std::vector<std::size_t> oracle_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) oracle_ids.push_back(oracle.insert(format.apply(lines[i]).tokens));

    REQUIRE(result.templates.size() == oracle.templates.size());
    for (std::size_t k = 0; k < oracle.templates.size(); ++k) CHECK(result.templates[k].tokens == oracle.templates[k]);
    for (std::size_t i = 0; i < lines.size(); ++i) CHECK(result.events[i].template_id == oracle_ids[i]);
    CHECK(result.templates.size() == 4);
}

TEST_CASE("events carry one parameter per wildcard of the final template") {
    const std::vector<std::string> lines{"send data to 5", "send data to 6", "send data from 7"};
    ParserConfig cfg;
    cfg.sim_threshold = 0.5;
    const auto result = parse_stream(lines, cfg, LineFormat());
    REQUIRE(result.templates.size() == 1);
    CHECK(result.templates[0].text() == "send data <*> <*>");
    for (const auto& e : result.events) CHECK(e.parameters.size() == result.templates[0].wildcard_count());
    CHECK(result.events[2].parameters == std::vector<std::string>{"from", "7"});

    std::ostringstream tmpl_out, event_out;
    write_templates(tmpl_out, result.templates);
    write_events(event_out, result.events);
    CHECK(tmpl_out.str() == "0\tsend data <*> <*>\n");
    CHECK(event_out.str() == "1\t0\tto\x1f" "5\n2\t0\tto\x1f" "6\n3\t0\tfrom\x1f" "7\n");

    std::istringstream back(tmpl_out.str());
    const auto reread = read_templates(back);
    REQUIRE(reread.size() == 1);
    CHECK(reread[0].tokens == result.templates[0].tokens);
}

TEST_CASE("overflowing a node routes new tokens to the wildcard child") {
    ParserConfig cfg;
    cfg.max_children = 3;
    cfg.sim_threshold = 0.9;
    ParseTree tree(cfg);
    for (const char* word : {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"}) {
        tree.insert(toks(std::string(word) + " event happened"));
    }
    CHECK(tree.widest_node() <= 3);
    CHECK(tree.templates().size() == 6);
    for (const auto& t : tree.templates()) CHECK(tree.match(t.tokens).has_value());
}

TEST_CASE("parser invariants hold on random corpora") {
    const std::vector<std::string> words{"open", "close", "read", "write", "block", "node", "user",
                                         "failed", "ok", "retry", "disk", "net"};
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        Rng rng(seed);
        std::vector<std::string> lines;
        for (int i = 0; i < 200; ++i) {
            const auto len = static_cast<std::size_t>(rng.between(1, 6));
            std::string line;
            for (std::size_t k = 0; k < len; ++k) {
                if (k) line += ' ';
                line += rng.chance(0.2) ? std::to_string(rng.below(1000)) : words[rng.below(words.size())];
            }
            lines.push_back(line);
        }
        ParserConfig cfg;
        cfg.max_children = 4;
        cfg.sim_threshold = 0.5;
        const auto format = LineFormat("", {}, {MaskRule::compile(R"(^\d+$)", "<*>")});

        // Partition and determinism.
        const auto a = parse_stream(lines, cfg, format);
        const auto b = parse_stream(lines, cfg, format);
        REQUIRE(a.events.size() == lines.size());
        for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(a.events[i].template_id == b.events[i].template_id);
        REQUIRE(a.templates.size() == b.templates.size());
        for (std::size_t k = 0; k < a.templates.size(); ++k) CHECK(a.templates[k].tokens == b.templates[k].tokens);

        // Wildcard monotonicity and re-parse closure, tracked insert by insert.
        ParseTree tree(cfg);
        std::vector<std::vector<std::string>> snapshot;
        std::vector<std::uint32_t> assigned;
        for (const auto& line : lines) {
            const auto tokens = format.apply(line).tokens;
            assigned.push_back(tree.insert(tokens));
            for (std::size_t k = 0; k < snapshot.size(); ++k) {
                for (std::size_t pos = 0; pos < snapshot[k].size(); ++pos) {
                    if (snapshot[k][pos] == "<*>") CHECK(tree.templates()[k].tokens[pos] == "<*>");
                }
            }
            snapshot.clear();
            for (const auto& t : tree.templates()) snapshot.push_back(t.tokens);
        }
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto tokens = format.apply(lines[i]).tokens;
            CHECK(seq_similarity(tokens, tree.at(assigned[i])) >= cfg.sim_threshold);
            CHECK(tree.match(tokens).has_value());
        }
        CHECK(tree.widest_node() <= cfg.max_children);
    }
}
