#include <doctest.h>

#include "generallog/config.hpp"
#include "generallog/errors.hpp"
#include "generallog/pipeline.hpp"
#include "generallog/synth.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace generallog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("generallog-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

class CountingClient : public rag::LlmClient {
public:
    std::string complete(const std::string& prompt) override {
        ++calls;
        return rag::mock_llm(prompt);
    }
    [[nodiscard]] std::string_view name() const override { return "mock"; }
    std::size_t calls = 0;
};

config::PipelineConfig small_corpus(const std::string& name, synth::SynthSpec spec = {}, std::uint64_t seed = 5) {
    spec.source_count = 300;
    spec.target_count = 300;
    const auto dir = scratch(name);
    synth::write_corpus(dir, synth::synth_generate(seed, spec), seed);
    auto cfg = config::load_config(dir / "generallog.conf");
    cfg.train.epochs = 15;
    cfg.train.hidden_dim = 16;
    return cfg;
}

std::string slurp(const fs::path& p) { return text::read_file(p); }

}  // namespace

TEST_CASE("every target sequence gets exactly one prediction") {
    const auto cfg = small_corpus("coverage");
    const auto out = scratch("coverage-out");
    const auto report = pipeline::run_pipeline(cfg, out);

    REQUIRE(report.rows.size() == 300);
    CHECK(report.general + report.proprietary + report.route_errors == report.rows.size());
    std::size_t general = 0, proprietary = 0;
    for (const auto& row : report.rows) {
        CHECK(row.truth.has_value());
        CHECK((row.label == 0 || row.label == 1));
        if (row.route == "General") {
            ++general;
            CHECK(row.predictor == "small_model");
        } else {
            REQUIRE(row.route == "Proprietary");
            ++proprietary;
            CHECK(row.predictor == "mock");
        }
    }
    CHECK(general == report.general);
    CHECK(proprietary == report.proprietary);
    CHECK(report.proprietary > 0);
    CHECK(report.general > 0);
    CHECK(report.llm_calls == report.proprietary);

    for (const char* file : {"report.tsv", "timings.tsv", "decisions.tsv", "model.ckpt", "training_log.tsv", "kb.tsv",
                             "verdicts.tsv", "embeddings.tsv", "source_templates.tsv", "target_templates.tsv"}) {
        CHECK_MESSAGE(fs::exists(out / file), file);
    }

    // The written report parses back, and its F1 agrees with its own P and R.
    std::ifstream in(out / "report.tsv");
    const auto parsed = pipeline::read_report(in);
    REQUIRE(parsed.rows.size() == report.rows.size());
    std::map<std::string, std::string> summary(parsed.summary.begin(), parsed.summary.end());
    for (const std::string scope : {"all", "general", "proprietary", "small_model_all"}) {
        const double p = text::parse_double(summary.at("precision." + scope));
        const double r = text::parse_double(summary.at("recall." + scope));
        const double f1 = text::parse_double(summary.at("f1." + scope));
        CHECK(p >= 0.0);
        CHECK(p <= 100.0);
        CHECK(r >= 0.0);
        CHECK(r <= 100.0);
        CHECK(std::abs(f1_score(p, r) - f1) <= 0.01);
    }
    std::vector<int> pred, truth;
    for (const auto& row : parsed.rows) {
        pred.push_back(row.label);
        truth.push_back(*row.truth);
    }
    CHECK(std::abs(compute_metrics(pred, truth).f1 - text::parse_double(summary.at("f1.all"))) <= 1e-6);
}

TEST_CASE("a fully General target issues no LLM calls") {
    synth::SynthSpec spec;
    spec.proprietary_pool = false;
    spec.proprietary_fraction = 0.0;
    spec.variant_rate = 0.0;
    auto cfg = small_corpus("all-general", spec);

    const auto data = pipeline::prepare(cfg);
    const auto scored = pipeline::route_target(data, {0.0});
    double min_score = 1.0;
    for (const auto& d : scored.decisions) min_score = std::min(min_score, d.score);
    // Shared templates only: every sequence is General at any tau up to the observed minimum.
    CHECK(routing::reroute(scored, {min_score}).general.size() == data.target.sequences.size());

    cfg.router.tau = min_score;
    CountingClient client;
    const auto report = pipeline::run_pipeline(cfg, {}, &client);
    CHECK(report.general == report.rows.size());
    CHECK(client.calls == 0);
    CHECK(report.llm_calls == 0);
}

TEST_CASE("a disjoint target at tau 1 goes entirely to the conservative default") {
    const auto dir = scratch("disjoint");
    std::ostringstream source, labels, target;
    labels << "SessionId,Label\n";
    for (int s = 0; s < 6; ++s) {
        for (const char* msg : {"alpha bravo charlie", "delta echo foxtrot", "golf hotel india"}) {
            source << "t" << s << " s" << s << " INFO " << msg << ' ' << s << '\n';
        }
        labels << 's' << s << ',' << (s == 0 ? "Anomaly" : "Normal") << '\n';
        target << "t" << s << " x" << s << " INFO kilo lima mike " << s << '\n';
        target << "t" << s << " x" << s << " INFO november oscar papa " << s << '\n';
    }
    text::write_file(dir / "source.log", source.str());
    text::write_file(dir / "labels.csv", labels.str());
    text::write_file(dir / "target.log", target.str());

    config::PipelineConfig cfg;
    for (auto* side : {&cfg.source, &cfg.target}) {
        side->header_regex = synth::kHeaderRegex;
        side->header_fields = text::split(synth::kHeaderFields, ',');
        side->session_regex = synth::kSessionRegex;
    }
    cfg.source.log = dir / "source.log";
    cfg.source.labels = dir / "labels.csv";
    cfg.target.log = dir / "target.log";
    cfg.router.tau = 1.0;

    CountingClient client;
    const auto report = pipeline::run_pipeline(cfg, dir / "out", &client);
    REQUIRE(report.rows.size() == 6);
    CHECK(report.proprietary == 6);
    CHECK(report.general == 0);
    CHECK(report.kb_size == 0);
    CHECK_FALSE(report.small_all.has_value());
    CHECK(client.calls == 6);
    for (const auto& row : report.rows) {
        CHECK(row.route == "Proprietary");
        CHECK(row.label == 1);
        CHECK(row.score < 1.0);
    }
    CHECK_FALSE(fs::exists(dir / "out" / "model.ckpt"));
}

TEST_CASE("runs are byte-identical and checkpoints are reusable") {
    const auto cfg = small_corpus("determinism");
    const auto a = scratch("determinism-a");
    const auto b = scratch("determinism-b");
    (void)pipeline::run_pipeline(cfg, a);
    (void)pipeline::run_pipeline(cfg, b);
    for (const char* file : {"report.tsv", "model.ckpt", "kb.tsv", "verdicts.tsv", "decisions.tsv"}) {
        CHECK_MESSAGE(slurp(a / file) == slurp(b / file), file);
    }

    auto reuse = cfg;
    reuse.checkpoint = a / "model.ckpt";
    const auto c = scratch("determinism-c");
    const auto report = pipeline::run_pipeline(reuse, c);
    CHECK(report.model_loaded);
    CHECK(slurp(c / "report.tsv") == slurp(a / "report.tsv"));
    const bool trained_again = fs::exists(c / "training_log.tsv") && !slurp(c / "training_log.tsv").empty();
    CHECK_FALSE(trained_again);
}

TEST_CASE("per-item routing failures become flagged default rows") {
    const auto cfg = small_corpus("route-errors");
    const auto data = pipeline::prepare(cfg);
    auto routed = pipeline::route_target(data, cfg.router);
    // Turn the first routed sequence into a failure.
    const std::size_t victim = 0;
    auto& list = std::find(routed.general.begin(), routed.general.end(), victim) != routed.general.end()
                     ? routed.general
                     : routed.proprietary;
    list.erase(std::find(list.begin(), list.end(), victim));
    routed.decisions.erase(routed.decisions.begin());
    routed.errors.push_back({victim, data.target.sequences[victim].id, "synthetic failure"});

    const auto model = pipeline::obtain_model(cfg, data, routed.general);
    rag::MockLlmClient client;
    const auto report = pipeline::detect(data, routed, model, client, cfg.rag_k, cfg.router.tau);
    REQUIRE(report.rows.size() == data.target.sequences.size());
    CHECK(report.route_errors == 1);
    CHECK(report.rows[0].route == "Error");
    CHECK(report.rows[0].predictor == "default");
    CHECK(report.rows[0].label == 1);
    CHECK(report.rows[0].flagged);
    CHECK(report.rows[1].sequence_id == data.target.sequences[1].id);
    CHECK(report.rows[1].route != "Error");
}

TEST_CASE("fatal errors carry the stage name") {
    auto cfg = small_corpus("stage-errors");
    cfg.target.log = cfg.target.log.parent_path() / "missing.log";
    try {
        (void)pipeline::run_pipeline(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
        CHECK(std::string(e.what()).find("stage parse") != std::string::npos);
    }

    auto bad_ckpt = small_corpus("stage-errors-ckpt");
    bad_ckpt.checkpoint = bad_ckpt.source.log;  // exists, but is not a checkpoint
    try {
        (void)pipeline::run_pipeline(bad_ckpt);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("stage train") != std::string::npos);
    }
}

TEST_CASE("threshold sweep") {
    const auto cfg = small_corpus("sweep");
    rag::MockLlmClient client;

    const std::vector<double> ends{0.0, 1.0};
    const auto extremes = pipeline::sweep_threshold(cfg, ends, &client);
    REQUIRE(extremes.size() == 2);
    CHECK(extremes[0].general_frac == 1.0);
    CHECK(extremes[0].general_frac >= extremes[1].general_frac);

    const auto grid = pipeline::sweep_threshold(cfg, cfg.sweep_taus, &client);
    REQUIRE(grid.size() == cfg.sweep_taus.size());
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i].general_frac <= grid[i - 1].general_frac);
    CHECK(grid.front().general_frac == extremes[0].general_frac);
    CHECK(grid.back().general_frac == extremes[1].general_frac);

    // A single tau reproduces run_pipeline's report.
    const std::vector<double> one{cfg.router.tau};
    const auto single = pipeline::sweep_threshold(cfg, one, &client);
    const auto report = pipeline::run_pipeline(cfg, {}, &client);
    REQUIRE(single.size() == 1);
    CHECK(single[0].general == report.general);
    CHECK(single[0].f1_pipeline_all == report.all->f1);
    CHECK(single[0].f1_small_all == report.small_all->f1);

    std::ostringstream plot;
    pipeline::write_sweep_plot(plot, grid);
    CHECK(text::split(plot.str(), '\n').front() == "tau\tgeneral_frac\tf1_general\tf1_proprietary\tf1_all");

    const std::vector<double> bad{1.2};
    CHECK_THROWS_AS((void)pipeline::sweep_threshold(cfg, bad, &client), Error);
}

TEST_CASE("default synthetic corpus matches the golden report") {
    const auto dir = scratch("golden");
    synth::write_corpus(dir, synth::synth_generate(7, {}), 7);
    const auto cfg = config::load_config(dir / "generallog.conf");
    (void)pipeline::run_pipeline(cfg, dir / "out");
    const fs::path golden = fs::path(GENERALLOG_TEST_DATA) / "golden_report_seed7.tsv";
    REQUIRE(fs::exists(golden));
    CHECK(slurp(dir / "out" / "report.tsv") == slurp(golden));
}

TEST_CASE("meta-training separates held-out source sessions within 50 epochs") {
    synth::SynthSpec spec;
    spec.source_count = 1000;
    spec.target_count = 300;
    const auto dir = scratch("held-out");
    synth::write_corpus(dir, synth::synth_generate(11, spec), 11);
    auto cfg = config::load_config(dir / "generallog.conf");
    cfg.train.epochs = 50;
    const auto data = pipeline::prepare(cfg);

    // Every fourth source session is held out.
    training::DomainDataset train_set;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < data.source.sequences.size(); ++i) {
        if (i % 4 == 3) {
            held_out.push_back(i);
            continue;
        }
        const auto& seq = data.source.sequences[i];
        train_set.source.push_back(training::encode(seq, data.embeddings));
        train_set.source_labels.push_back(*seq.truth_label);
    }
    for (const auto& seq : data.target.sequences) train_set.target.push_back(training::encode(seq, data.embeddings));

    const auto model = training::train(train_set, cfg.train);
    std::vector<int> pred, truth;
    for (const auto i : held_out) {
        const auto& seq = data.source.sequences[i];
        pred.push_back(training::predict(model, seq, data.embeddings).label);
        truth.push_back(*seq.truth_label);
    }
    const auto m = compute_metrics(pred, truth);
    MESSAGE("held-out source F1 " << m.f1);
    CHECK(m.f1 >= 95.0);
}
