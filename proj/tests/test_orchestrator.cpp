#include <doctest.h>

#include "generallog/config.hpp"
#include "generallog/errors.hpp"
#include "generallog/loaders.hpp"
#include "generallog/metrics.hpp"
#include "generallog/synth.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <regex>
#include <set>

using namespace generallog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("generallog-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const fs::path kData = GENERALLOG_TEST_DATA;

}  // namespace

TEST_CASE("metrics reproduce the published F1 values") {
    struct Row {
        double p, r, f1;
    };
    // Precision/recall pairs and F1 of the four transfer settings.
    for (const auto& row : {Row{94.35, 96.64, 95.48}, Row{93.28, 96.53, 94.88}, Row{90.18, 93.85, 91.98},
                            Row{91.74, 92.88, 92.31}}) {
        CHECK(std::abs(f1_score(row.p, row.r) - row.f1) <= 0.01);
    }
    CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("confusion counts and percentages") {
    const std::vector<int> truth{1, 1, 1, 0, 0, 0, 0, 1};
    const std::vector<int> pred{1, 0, 1, 1, 0, 0, 0, 1};
    const auto m = compute_metrics(pred, truth);
    CHECK(m.tp == 3);
    CHECK(m.fn == 1);
    CHECK(m.fp == 1);
    CHECK(m.tn == 3);
    CHECK(m.precision == doctest::Approx(75.0));
    CHECK(m.recall == doctest::Approx(75.0));
    CHECK(m.f1 == doctest::Approx(75.0));

    const auto perfect = compute_metrics(truth, truth);
    CHECK(perfect.precision == 100.0);
    CHECK(perfect.recall == 100.0);
    CHECK(perfect.f1 == 100.0);

    const std::vector<int> zeros(4, 0);
    const auto none = compute_metrics(zeros, zeros);
    CHECK(none.precision_undefined);
    CHECK(none.recall_undefined);
    CHECK(none.f1 == 0.0);

    CHECK_THROWS_AS((void)compute_metrics(std::vector<int>{1}, truth), Error);
}

TEST_CASE("label tables accept both spellings and an optional header") {
    const std::vector<std::string> lines{"BlockId,Label", "blk_1,Normal", "blk_2,anomaly", "", "blk_3,1"};
    const auto t = loaders::parse_labels(lines);
    CHECK(t.size() == 3);
    CHECK(t.at("blk_1") == 0);
    CHECK(t.at("blk_2") == 1);
    CHECK(t.at("blk_3") == 1);
    CHECK_THROWS_AS((void)loaders::parse_labels(std::vector<std::string>{"blk_1,Maybe"}), Error);
    CHECK_THROWS_AS((void)loaders::parse_labels(std::vector<std::string>{"blk_1"}), Error);
}

TEST_CASE("HDFS sessions group by block id") {
    const auto corpus = loaders::load_hdfs(kData / "hdfs_sample.log", kData / "hdfs_labels.csv", {});
    // Hand-built oracle: block -> 1-based line numbers, in order of first appearance.
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> oracle{
        {"blk_-1608999687919862906", {1, 2, 4, 11}},
        {"blk_7503483334202473044", {3, 6, 10}},
        {"blk_-3544583377289625738", {5, 7, 9}},
    };
    const auto lines = text::read_lines(kData / "hdfs_sample.log");
    const auto parsed = parsing::parse_stream(lines, {}, loaders::hdfs_format());
    std::map<std::size_t, std::uint32_t> template_of_line;
    for (const auto& e : parsed.events) template_of_line[e.line_number] = e.template_id;

    REQUIRE(corpus.sequences.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        const auto& seq = corpus.sequences[i];
        CHECK(seq.id == oracle[i].first);
        std::vector<std::uint32_t> expected;
        for (const auto line : oracle[i].second) expected.push_back(template_of_line.at(line));
        CHECK(seq.template_ids == expected);
    }
    CHECK(corpus.sequences[0].truth_label == 0);
    CHECK(corpus.sequences[2].truth_label == 1);
    CHECK(corpus.report.lines_read == 11);
    CHECK(corpus.report.lines_without_key == 1);
}

TEST_CASE("one block over three lines is one sequence of length three") {
    const std::vector<std::string> lines{
        "081109 203518 1 INFO dfs.DataNode: Receiving block blk_42 src: /10.0.0.1:1 dest: /10.0.0.2:2",
        "081109 203519 1 INFO dfs.DataNode: PacketResponder 1 for block blk_42 terminating",
        "081109 203520 1 INFO dfs.DataNode: Received block blk_42 of size 10 from /10.0.0.1",
    };
    const std::regex key(loaders::kHdfsSessionRegex);
    const auto corpus = loaders::load_sessions(lines, "HDFS", loaders::hdfs_format(), {}, key, nullptr);
    REQUIRE(corpus.sequences.size() == 1);
    CHECK(corpus.sequences[0].template_ids.size() == 3);
    CHECK_FALSE(corpus.sequences[0].truth_label.has_value());
}

TEST_CASE("unlabeled sessions are reported and excluded") {
    const std::vector<std::string> lines{
        "081109 203518 1 INFO dfs.DataNode: Receiving block blk_1 src: /10.0.0.1:1 dest: /10.0.0.2:2",
        "081109 203518 1 INFO dfs.DataNode: Receiving block blk_2 src: /10.0.0.1:1 dest: /10.0.0.2:2",
    };
    const loaders::LabelTable labels{{"blk_1", 0}};
    const std::regex key(loaders::kHdfsSessionRegex);
    const auto corpus = loaders::load_sessions(lines, "HDFS", loaders::hdfs_format(), {}, key, &labels);
    REQUIRE(corpus.sequences.size() == 1);
    CHECK(corpus.sequences[0].id == "blk_1");
    CHECK(corpus.report.unlabeled == std::vector<std::string>{"blk_2"});
}

TEST_CASE("window planning matches index arithmetic") {
    const auto oracle = [](std::size_t count, std::size_t w, std::size_t s) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        std::size_t dropped = 0;
        for (std::size_t k = 0; k * s < count; ++k) {
            const std::size_t b = k * s;
            const std::size_t e = b + w < count ? b + w : count;
            if (e - b >= (w + 1) / 2) out.emplace_back(b, e);
            else ++dropped;
            if (e == count) break;
        }
        return std::make_pair(out, dropped);
    };
    const auto as_pairs = [](const std::vector<loaders::Window>& ws) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& w : ws) out.emplace_back(w.begin, w.end);
        return out;
    };

    std::size_t dropped = 0;
    const auto w = loaders::plan_windows(250, 100, 50, &dropped);
    const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 100}, {50, 150}, {100, 200}, {150, 250}};
    CHECK(as_pairs(w) == expected);
    CHECK(dropped == 0);

    for (std::size_t count : {1u, 7u, 99u, 100u, 149u, 150u, 151u, 250u, 333u}) {
        for (std::size_t size : {1u, 10u, 100u}) {
            for (std::size_t stride : {1u, 10u, 50u, 100u}) {
                std::size_t d = 0;
                const auto [ow, od] = oracle(count, size, stride);
                CHECK(as_pairs(loaders::plan_windows(count, size, stride, &d)) == ow);
                CHECK(d == od);
            }
        }
    }
    CHECK_THROWS_AS((void)loaders::plan_windows(10, 0, 1, nullptr), Error);
    CHECK_THROWS_AS((void)loaders::plan_windows(10, 1, 0, nullptr), Error);
}

namespace {

std::string bgl_line(bool alert, int i) {
    const std::string tag = alert ? "KERNDTLB" : "-";
    return tag + " 1117838570 2005.06.03 R02-M1-N0 2005-06-03-15.42.50." + std::to_string(100000 + i) +
           " R02-M1-N0 RAS KERNEL INFO instruction cache parity error corrected " + std::to_string(i);
}

}  // namespace

TEST_CASE("BGL windows and labels") {
    std::vector<std::string> normal;
    for (int i = 0; i < 200; ++i) normal.push_back(bgl_line(false, i));
    const auto fmt = loaders::bgl_format();
    auto corpus = loaders::load_bgl_lines(normal, "BGL", fmt, {}, 100, 100);
    REQUIRE(corpus.sequences.size() == 2);
    CHECK(corpus.sequences[0].truth_label == 0);
    CHECK(corpus.sequences[1].truth_label == 0);
    CHECK(corpus.sequences[1].id == "BGL-w100");
    CHECK(corpus.sequences[0].template_ids.size() == 100);

    auto with_alert = normal;
    with_alert[130] = bgl_line(true, 130);
    corpus = loaders::load_bgl_lines(with_alert, "BGL", fmt, {}, 100, 100);
    CHECK(corpus.sequences[0].truth_label == 0);
    CHECK(corpus.sequences[1].truth_label == 1);

    std::vector<std::string> tail = normal;
    for (int i = 200; i < 240; ++i) tail.push_back(bgl_line(false, i));
    corpus = loaders::load_bgl_lines(tail, "BGL", fmt, {}, 100, 100);
    CHECK(corpus.sequences.size() == 2);
    CHECK(corpus.report.windows_dropped == 1);

    CHECK_THROWS_AS((void)loaders::load_bgl_lines(std::vector<std::string>{}, "BGL", fmt, {}, 100, 100), Error);
}

TEST_CASE("synthetic corpus realizes the requested anomaly rate") {
    const synth::SynthSpec spec;
    const auto corpus = synth::synth_generate(7, spec);
    const auto dir = scratch("synth-counts");
    synth::write_corpus(dir, corpus, 7);

    // Counting oracle over the written files.
    const auto count = [&](const std::string& file, const std::string& value) {
        const auto lines = text::read_lines(dir / file);
        std::size_t rows = 0, hits = 0;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            ++rows;
            hits += text::split(lines[i], ',').at(1) == value ? 1 : 0;
        }
        return std::make_pair(rows, hits);
    };
    for (const char* file : {"source_labels.csv", "target_labels.csv"}) {
        const auto [rows, anomalies] = count(file, "Anomaly");
        CHECK(rows == 2000);
        CHECK(std::abs(static_cast<double>(anomalies) / static_cast<double>(rows) - spec.anomaly_rate) <= 0.01);
    }
    const auto [rows, proprietary] = count("target_kinds.csv", "Proprietary");
    CHECK(rows == 2000);
    CHECK(proprietary == 600);

    // Every session id in the logs has a label row, and vice versa.
    std::set<std::string> logged;
    const std::regex key(synth::kSessionRegex);
    for (const auto& line : text::read_lines(dir / "target.log")) {
        std::smatch m;
        REQUIRE(std::regex_search(line, m, key));
        logged.insert(m[1].str());
    }
    CHECK(logged.size() == 2000);
    CHECK(fs::exists(dir / "generallog.conf"));
}

TEST_CASE("synthetic generation edge cases") {
    synth::SynthSpec spec;
    spec.source_count = 200;
    spec.target_count = 200;
    spec.anomaly_rate = 0.0;
    const auto clean = synth::synth_generate(3, spec);
    for (const auto* side : {&clean.source, &clean.target}) {
        for (const auto& s : side->sessions) CHECK(s.label == 0);
    }

    spec.anomaly_rate = 0.1;
    const auto a = synth::synth_generate(11, spec);
    const auto b = synth::synth_generate(11, spec);
    CHECK(a.source.lines == b.source.lines);
    CHECK(a.target.lines == b.target.lines);
    const auto c = synth::synth_generate(12, spec);
    CHECK(a.target.lines != c.target.lines);

    // Source sessions come only from the shared pool.
    for (const auto& s : a.source.sessions) CHECK(s.kind == synth::SessionKind::General);

    spec.proprietary_pool = false;
    CHECK_THROWS_AS((void)synth::synth_generate(1, spec), Error);
    spec.proprietary_fraction = 0.0;
    const auto shared_only = synth::synth_generate(1, spec);
    for (const auto& s : shared_only.target.sessions) CHECK(s.kind == synth::SessionKind::General);

    spec.anomaly_rate = 1.0;
    CHECK_THROWS_AS((void)synth::synth_generate(1, spec), Error);
    spec = {};
    spec.source_count = 0;
    CHECK_THROWS_AS((void)synth::synth_generate(1, spec), Error);
}

TEST_CASE("config files round-trip through render and parse") {
    config::PipelineConfig cfg;
    cfg.seed = 99;
    cfg.train.seed = 99;
    cfg.source.format = "hdfs";
    cfg.source.log = "/data/src.log";
    cfg.source.labels = "/data/src.csv";
    cfg.source.masks = {{R"(blk_-?\d+)", "<*>"}, {R"(\d+)", "<NUM>"}};
    cfg.target.format = "bgl";
    cfg.target.log = "/data/tgt.log";
    cfg.router.tau = 0.35;
    cfg.train.alpha = 0.123456789;
    cfg.train.epochs = 7;
    cfg.rag_k = 3;
    cfg.llm_mock = false;
    cfg.llm.endpoint = "http://localhost:8000/v1/chat/completions";
    cfg.llm.model = "qwen3";
    cfg.llm.api_key_env = "LLM_API_KEY";
    cfg.sweep_taus = {0.1, 0.7};
    cfg.fallback = embedding::FallbackMode::Zero;
    const auto text = config::render_config(cfg);
    const auto back = config::parse_config(text, "/elsewhere");
    CHECK(config::render_config(back) == text);
    CHECK(back.seed == 99);
    CHECK(back.train.seed == 99);
    CHECK(back.source.masks == cfg.source.masks);
    CHECK(back.router.tau == cfg.router.tau);
    CHECK(back.train.alpha == cfg.train.alpha);
    CHECK(back.sweep_taus == cfg.sweep_taus);
    CHECK(back.fallback == embedding::FallbackMode::Zero);
    CHECK_FALSE(back.llm_mock);
    CHECK(back.llm.api_key_env == "LLM_API_KEY");
    CHECK_NOTHROW(back.validate());
}

TEST_CASE("config errors name the line") {
    const auto expect_config_error = [](const std::string& text, const std::string& fragment) {
        try {
            (void)config::parse_config(text, "");
            FAIL("expected a config error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Config);
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };
    expect_config_error("config_version = 1\nrouter.tauu = 0.5\n", "line 2");
    expect_config_error("config_version = 1\n\n# c\nseed = -3\n", "line 4");
    expect_config_error("config_version = 2\n", "line 1");
    expect_config_error("seed = 3\n", "config_version");
    expect_config_error("config_version = 1\nno equals sign\n", "line 2");
    expect_config_error("config_version = 1\nsource.mask = [\n", "line 2");

    auto cfg = config::parse_config("config_version = 1\nsource.log = a.log\nsource.labels = a.csv\n"
                                    "source.session_regex = (x)\ntarget.log = /abs/b.log\n"
                                    "target.session_regex = (x)\n",
                                    "/base");
    CHECK(cfg.source.log == fs::path("/base/a.log"));
    CHECK(cfg.target.log == fs::path("/abs/b.log"));
    CHECK_NOTHROW(cfg.validate());
    cfg.router.tau = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.router.tau = 0.5;
    cfg.sweep_taus = {-0.1};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.sweep_taus = {0.5};
    cfg.llm_mock = false;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
