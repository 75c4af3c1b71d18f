#include "generallog/config.hpp"
#include "generallog/errors.hpp"
#include "generallog/metrics.hpp"
#include "generallog/pipeline.hpp"
#include "generallog/synth.hpp"
#include "generallog/text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace generallog;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool mock_llm = false;
};

config::PipelineConfig load(const Globals& g) {
    if (g.config_path.empty()) throw Error(ErrorCode::Config, "--config is required for this command");
    auto cfg = config::load_config(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (g.mock_llm) cfg.llm_mock = true;
    cfg.validate();
    return cfg;
}

void save(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ostringstream out;
    body(out);
    text::write_file(path, out.str());
    std::cout << "wrote " << path.string() << '\n';
}

void write_sequences(std::ostream& out, const std::vector<LogSequence>& seqs,
                     const std::vector<std::optional<int>>* truth) {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto& s = seqs[i];
        const auto label = truth ? (*truth)[i] : s.truth_label;
        out << s.system << '\t' << s.id << '\t' << (label ? std::to_string(*label) : "-") << '\t';
        for (std::size_t j = 0; j < s.template_ids.size(); ++j) out << (j ? " " : "") << s.template_ids[j];
        out << '\n';
    }
}

void print_load(const std::string& name, const pipeline::SystemData& d) {
    std::cout << name << ": " << d.report.lines_read << " lines, " << d.report.lines_parsed << " parsed, "
              << d.report.skipped.size() << " skipped, " << d.templates.size() << " templates, "
              << d.sequences.size() << " sequences";
    if (!d.report.unlabeled.empty()) std::cout << ", " << d.report.unlabeled.size() << " unlabeled dropped";
    if (d.report.windows_dropped) std::cout << ", " << d.report.windows_dropped << " windows dropped";
    std::cout << '\n';
}

void print_metrics(const std::string& scope, const std::optional<Metrics>& m) {
    if (!m || m->total() == 0) {
        std::cout << scope << ": n/a\n";
        return;
    }
    std::cout << scope << ": P=" << text::fixed(m->precision, 2) << " R=" << text::fixed(m->recall, 2)
              << " F1=" << text::fixed(m->f1, 2) << " (tp=" << m->tp << " fp=" << m->fp << " fn=" << m->fn
              << " tn=" << m->tn << ")\n";
}

int cmd_synth(const Globals& g, const synth::SynthSpec& spec) {
    const std::uint64_t seed = g.seed.value_or(7);
    const auto corpus = synth::synth_generate(seed, spec);
    synth::write_corpus(g.out, corpus, seed);
    std::size_t anomalies = 0;
    for (const auto& s : corpus.target.sessions) anomalies += static_cast<std::size_t>(s.label);
    std::cout << "wrote synthetic corpus to " << g.out << ": " << corpus.source.sessions.size() << " source and "
              << corpus.target.sessions.size() << " target sessions (" << anomalies << " target anomalies)\n";
    return 0;
}

int cmd_parse(const Globals& g) {
    const auto cfg = load(g);
    const auto data = pipeline::prepare(cfg);
    print_load("source", data.source);
    print_load("target", data.target);
    const fs::path out = g.out;
    save(out / "source_templates.tsv", [&](std::ostream& o) { parsing::write_templates(o, data.source.templates); });
    save(out / "target_templates.tsv", [&](std::ostream& o) { parsing::write_templates(o, data.target.templates); });
    save(out / "sequences.tsv", [&](std::ostream& o) {
        write_sequences(o, data.source.sequences, nullptr);
        write_sequences(o, data.target.sequences, &data.target_truth);
    });
    return 0;
}

int cmd_embed(const Globals& g) {
    const auto cfg = load(g);
    const auto data = pipeline::prepare(cfg);
    std::cout << data.embeddings.size() << " template embeddings of dimension " << cfg.embedding_dim << ", "
              << data.index.vectors.size() << " in the source index\n";
    save(fs::path(g.out) / "embeddings.tsv", [&](std::ostream& o) { embedding::write_embeddings(o, data.embeddings); });
    return 0;
}

int cmd_route(const Globals& g, std::optional<double> tau) {
    auto cfg = load(g);
    if (tau) cfg.router.tau = *tau;
    cfg.router.validate();
    const auto data = pipeline::prepare(cfg);
    const auto routed = pipeline::route_target(data, cfg.router);
    std::cout << "tau " << text::fixed(cfg.router.tau, 3) << ": " << routed.general.size() << " General, "
              << routed.proprietary.size() << " Proprietary, " << routed.errors.size() << " errors\n";
    for (const auto& e : routed.errors) std::cerr << "route error: " << e.sequence_id << ": " << e.message << '\n';
    save(fs::path(g.out) / "decisions.tsv", [&](std::ostream& o) { routing::write_decisions(o, routed.decisions); });
    return 0;
}

int cmd_train(const Globals& g) {
    const auto cfg = load(g);
    const auto data = pipeline::prepare(cfg);
    const auto routed = pipeline::route_target(data, cfg.router);
    if (routed.general.empty()) throw Error(ErrorCode::InsufficientData, "no target sequence routes General");
    const auto model = training::train(pipeline::make_dataset(data, routed.general), cfg.train,
                                       [](const training::EpochLog& e) {
                                           std::cout << "epoch " << e.epoch << " L_c=" << text::fixed(e.class_loss, 6)
                                                     << " L_ad=" << text::fixed(e.domain_loss, 6) << '\n';
                                       });
    const fs::path out = g.out;
    const fs::path ckpt = cfg.checkpoint.empty() ? out / "model.ckpt" : cfg.checkpoint;
    pipeline::save_model(ckpt, model);
    std::cout << "wrote " << ckpt.string() << '\n';
    save(out / "training_log.tsv", [&](std::ostream& o) { training::write_training_log(o, model.history); });
    return 0;
}

int cmd_build_kb(const Globals& g) {
    auto cfg = load(g);
    const fs::path out = g.out;
    if (cfg.checkpoint.empty() && fs::exists(out / "model.ckpt")) cfg.checkpoint = out / "model.ckpt";
    const auto data = pipeline::prepare(cfg);
    const auto routed = pipeline::route_target(data, cfg.router);
    bool loaded = false;
    const auto model = pipeline::obtain_model(cfg, data, routed.general, &loaded);
    rag::KnowledgeBase kb;
    if (model) {
        std::vector<LogSequence> general;
        std::vector<training::Prediction> preds;
        for (const auto i : routed.general) {
            general.push_back(data.target.sequences[i]);
            preds.push_back(training::predict(*model, general.back(), data.embeddings));
        }
        kb = rag::build_kb(general, preds, data.embeddings, data.catalog);
    }
    std::cout << "model " << (model ? (loaded ? "loaded" : "trained") : "unavailable") << "; " << kb.size()
              << " entries, " << kb.excluded << " excluded as low confidence\n";
    save(out / "kb.tsv", [&](std::ostream& o) { rag::write_kb(o, kb); });
    return 0;
}

int cmd_detect(const Globals& g) {
    const auto cfg = load(g);
    const auto report = pipeline::run_pipeline(cfg, g.out);
    std::cout << report.rows.size() << " sequences: " << report.general << " General, " << report.proprietary
              << " Proprietary, " << report.route_errors << " route errors; " << report.llm_calls << " LLM calls ("
              << (cfg.llm_mock ? "mock" : "llm") << "); KB " << report.kb_size << " entries\n";
    print_metrics("pipeline", report.all);
    print_metrics("pipeline/general", report.on_general);
    print_metrics("pipeline/proprietary", report.on_proprietary);
    print_metrics("small model/all", report.small_all);
    std::cout << "wrote " << (fs::path(g.out) / "report.tsv").string() << '\n';
    return 0;
}

int cmd_eval(const Globals& g, const std::string& report_path) {
    const fs::path path = report_path.empty() ? fs::path(g.out) / "report.tsv" : fs::path(report_path);
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    const auto parsed = pipeline::read_report(in);
    std::vector<int> pred, truth;
    std::vector<int> pred_g, truth_g, pred_p, truth_p;
    for (const auto& row : parsed.rows) {
        if (!row.truth) throw Error(ErrorCode::InvalidArgument, "row " + row.sequence_id + " has no truth label");
        pred.push_back(row.label);
        truth.push_back(*row.truth);
        if (row.route == "General") {
            pred_g.push_back(row.label);
            truth_g.push_back(*row.truth);
        } else if (row.route == "Proprietary") {
            pred_p.push_back(row.label);
            truth_p.push_back(*row.truth);
        }
    }
    const auto all = compute_metrics(pred, truth);
    print_metrics("all", all);
    print_metrics("general", compute_metrics(pred_g, truth_g));
    print_metrics("proprietary", compute_metrics(pred_p, truth_p));
    int status = 0;
    for (const auto& [key, value] : parsed.summary) {
        if (key != "f1.all" || value == "n/a") continue;
        const double stored = text::parse_double(value);
        if (std::abs(stored - all.f1) > 0.01) {
            std::cerr << "summary f1.all " << value << " disagrees with recomputed " << text::fixed(all.f1, 6) << '\n';
            status = 1;
        }
    }
    const double harmonic = f1_score(all.precision, all.recall);
    if (std::abs(harmonic - all.f1) > 0.01) status = 1;
    std::cout << (status == 0 ? "report is consistent\n" : "report is inconsistent\n");
    return status;
}

int cmd_sweep(const Globals& g, const std::vector<double>& taus) {
    const auto cfg = load(g);
    const auto rows = pipeline::sweep_threshold(cfg, taus.empty() ? cfg.sweep_taus : taus);
    pipeline::write_sweep_table(std::cout, rows);
    const fs::path out = g.out;
    save(out / "sweep_table.tsv", [&](std::ostream& o) { pipeline::write_sweep_table(o, rows); });
    save(out / "sweep_plot.tsv", [&](std::ostream& o) { pipeline::write_sweep_plot(o, rows); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-label cross-system log anomaly detection"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Pipeline config file");
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_flag("--mock-llm", g.mock_llm, "Use the deterministic mock LLM");

    auto* parse = app.add_subcommand("parse", "Mine templates and group sequences");
    auto* embed = app.add_subcommand("embed", "Embed every template");
    std::optional<double> tau;
    auto* route = app.add_subcommand("route", "Split target sequences into General and Proprietary");
    route->add_option("--tau", tau, "Override router.tau");
    auto* train = app.add_subcommand("train", "Meta-train the small model on source plus target General");
    auto* build_kb = app.add_subcommand("build-kb", "Build the retrieval knowledge base from General predictions");
    auto* detect = app.add_subcommand("detect", "Run the full pipeline and write the report");
    std::string report_path;
    auto* eval = app.add_subcommand("eval", "Recompute metrics from a report");
    eval->add_option("--report", report_path, "Report file (default <out>/report.tsv)");
    std::vector<double> taus;
    auto* sweep = app.add_subcommand("sweep", "Evaluate a grid of routing thresholds");
    sweep->add_option("--taus", taus, "Thresholds (default sweep.taus)")->delimiter(',');
    synth::SynthSpec spec;
    bool no_proprietary = false;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic source/target corpus with a config");
    synth_cmd->add_option("--source-count", spec.source_count)->capture_default_str();
    synth_cmd->add_option("--target-count", spec.target_count)->capture_default_str();
    synth_cmd->add_option("--anomaly-rate", spec.anomaly_rate)->capture_default_str();
    synth_cmd->add_option("--proprietary-fraction", spec.proprietary_fraction)->capture_default_str();
    synth_cmd->add_option("--variant-rate", spec.variant_rate)->capture_default_str();
    synth_cmd->add_flag("--no-proprietary", no_proprietary, "Leave the proprietary template pool empty");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*parse) return cmd_parse(g);
        if (*embed) return cmd_embed(g);
        if (*route) return cmd_route(g, tau);
        if (*train) return cmd_train(g);
        if (*build_kb) return cmd_build_kb(g);
        if (*detect) return cmd_detect(g);
        if (*eval) return cmd_eval(g, report_path);
        if (*sweep) return cmd_sweep(g, taus);
        if (*synth_cmd) {
            spec.proprietary_pool = !no_proprietary;
            return cmd_synth(g, spec);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::Config ? 2 : 1;
    }
    return 0;
}
