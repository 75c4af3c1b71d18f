#include "generallog/pipeline.hpp"

#include "generallog/neural/checkpoint.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <functional>
#include <regex>
#include <sstream>

namespace generallog::pipeline {

namespace {

std::vector<std::string> read_log(const std::filesystem::path& path, const std::string& name) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::Io, name + " log not found: " + path.string());
    }
    return text::read_lines(path);
}

std::regex compile_key(const std::string& pattern, const std::string& name) {
    try {
        return std::regex(pattern, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::Config, name + ".session_regex does not compile: " + e.what());
    }
}

std::optional<Metrics> metrics_over(const std::vector<ReportRow>& rows, const std::vector<int>& labels,
                                    const std::vector<std::size_t>& positions) {
    std::vector<int> pred, truth;
    for (const auto i : positions) {
        if (!rows[i].truth) return std::nullopt;
        pred.push_back(labels[i]);
        truth.push_back(*rows[i].truth);
    }
    return compute_metrics(pred, truth);
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ostringstream out;
    body(out);
    text::write_file(path, out.str());
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\t') out += "\\t";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

void put_metrics(std::ostream& out, const std::string& scope, const std::optional<Metrics>& m) {
    if (!m || m->total() == 0) {
        out << "f1." << scope << "\tn/a\n";
        return;
    }
    out << "precision." << scope << '\t' << text::fixed(m->precision, 6) << (m->precision_undefined ? " undefined" : "")
        << '\n';
    out << "recall." << scope << '\t' << text::fixed(m->recall, 6) << (m->recall_undefined ? " undefined" : "") << '\n';
    out << "f1." << scope << '\t' << text::fixed(m->f1, 6) << '\n';
    out << "counts." << scope << "\ttp=" << m->tp << " fp=" << m->fp << " fn=" << m->fn << " tn=" << m->tn << '\n';
}

double f1_or_zero(const std::optional<Metrics>& m) { return m ? m->f1 : 0.0; }

}  // namespace

SystemData load_system(const config::SystemConfig& system, const std::string& name, parsing::ParserConfig parser,
                       std::size_t bgl_window, std::size_t bgl_stride) {
    const auto lines = read_log(system.log, name);
    const auto format = system.line_format();
    loaders::LoadedCorpus loaded;
    if (system.format == "bgl") {
        loaded = loaders::load_bgl_lines(lines, name, format, parser, bgl_window, bgl_stride);
    } else {
        const std::string pattern = !system.session_regex.empty() ? system.session_regex
                                    : system.format == "hdfs"     ? std::string(loaders::kHdfsSessionRegex)
                                                                  : std::string();
        if (pattern.empty()) throw Error(ErrorCode::Config, name + ".session_regex must be set");
        const auto key = compile_key(pattern, name);
        std::optional<loaders::LabelTable> labels;
        if (!system.labels.empty()) {
            if (!std::filesystem::exists(system.labels)) {
                throw Error(ErrorCode::Io, name + " labels not found: " + system.labels.string());
            }
            labels = loaders::read_labels(system.labels);
        }
        loaded = loaders::load_sessions(lines, name, format, parser, key, labels ? &*labels : nullptr);
    }
    return {std::move(loaded.sequences), std::move(loaded.templates), std::move(loaded.report)};
}

Prepared prepare(const config::PipelineConfig& cfg, std::vector<StageTiming>* timings) {
    cfg.validate();
    Prepared data;
    timed_stage("parse", timings, [&] {
        auto parser = cfg.parser;
        parser.first_id = 0;
        data.source = load_system(cfg.source, "source", parser, cfg.bgl_window, cfg.bgl_stride);
        if (data.source.sequences.empty()) throw Error(ErrorCode::EmptyCorpus, "source produced no sequences");
        for (const auto& seq : data.source.sequences) {
            if (!seq.truth_label) throw Error(ErrorCode::NoLabels, "source sequence " + seq.id + " has no label");
        }
        std::uint32_t next_id = 0;
        for (const auto& t : data.source.templates) next_id = std::max(next_id, t.id + 1);
        parser.first_id = next_id;
        data.target = load_system(cfg.target, "target", parser, cfg.bgl_window, cfg.bgl_stride);
        if (data.target.sequences.empty()) throw Error(ErrorCode::EmptyCorpus, "target produced no sequences");
        for (auto& seq : data.target.sequences) {
            data.target_truth.push_back(seq.truth_label);
            seq.truth_label.reset();
        }
        for (const auto* side : {&data.source, &data.target}) {
            for (const auto& t : side->templates) data.catalog.emplace(t.id, t);
        }
    });
    timed_stage("embed", timings, [&] {
        auto table = cfg.word_vectors.empty() ? embedding::WordVectorTable(cfg.embedding_dim, cfg.fallback)
                                              : embedding::WordVectorTable::load(cfg.word_vectors, cfg.fallback);
        if (table.dimension() != cfg.embedding_dim) {
            throw Error(ErrorCode::DimensionMismatch, "word vectors have dimension " +
                                                          std::to_string(table.dimension()) + ", embedding.dim is " +
                                                          std::to_string(cfg.embedding_dim));
        }
        std::vector<parsing::LogTemplate> all = data.source.templates;
        all.insert(all.end(), data.target.templates.begin(), data.target.templates.end());
        data.embeddings = embedding::embed_templates(all, table);
        data.index = routing::SourceEmbeddingIndex::build(data.source.sequences, data.embeddings, "source");
    });
    return data;
}

routing::RoutedCorpus route_target(const Prepared& data, const routing::RouterConfig& router) {
    return routing::route_corpus(data.target.sequences, data.index, data.embeddings, router);
}

training::DomainDataset make_dataset(const Prepared& data, std::span<const std::size_t> general) {
    training::DomainDataset ds;
    for (const auto& seq : data.source.sequences) {
        ds.source.push_back(training::encode(seq, data.embeddings));
        ds.source_labels.push_back(*seq.truth_label);
    }
    for (const auto i : general) ds.target.push_back(training::encode(data.target.sequences.at(i), data.embeddings));
    return ds;
}

training::TrainedModel model_from_checkpoint(const std::filesystem::path& path) {
    auto ckpt = neural::load_checkpoint(path);
    training::TrainedModel m;
    m.input_dim = ckpt.params.extractor.input_dim();
    m.hidden_dim = ckpt.params.extractor.hidden_dim();
    m.params = std::move(ckpt.params);
    m.decision_threshold = ckpt.decision_threshold;
    m.config.seed = ckpt.seed;
    m.config.hidden_dim = m.hidden_dim;
    m.config.decision_threshold = ckpt.decision_threshold;
    return m;
}

void save_model(const std::filesystem::path& path, const training::TrainedModel& model) {
    neural::save_checkpoint(path, {model.params, model.config.seed, model.decision_threshold});
}

std::optional<training::TrainedModel> obtain_model(const config::PipelineConfig& cfg, const Prepared& data,
                                                   std::span<const std::size_t> general, bool* loaded) {
    if (loaded) *loaded = false;
    if (!cfg.checkpoint.empty() && std::filesystem::exists(cfg.checkpoint)) {
        auto model = model_from_checkpoint(cfg.checkpoint);
        if (model.input_dim != cfg.embedding_dim) {
            throw Error(ErrorCode::DimensionMismatch, "checkpoint expects input dimension " +
                                                          std::to_string(model.input_dim) + ", embedding.dim is " +
                                                          std::to_string(cfg.embedding_dim));
        }
        if (loaded) *loaded = true;
        return model;
    }
    if (general.empty()) return std::nullopt;
    return training::train(make_dataset(data, general), cfg.train);
}

std::unique_ptr<rag::LlmClient> make_client(const config::PipelineConfig& cfg) {
    if (cfg.llm_mock) return std::make_unique<rag::MockLlmClient>();
    return std::make_unique<rag::HttpLlmClient>(cfg.llm);
}

DetectionReport detect(const Prepared& data, const routing::RoutedCorpus& routed,
                       const std::optional<training::TrainedModel>& model, rag::LlmClient& client, std::size_t k,
                       double tau, Artifacts* artifacts) {
    const auto& seqs = data.target.sequences;
    const std::size_t n = seqs.size();
    DetectionReport report;
    report.tau = tau;
    report.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        report.rows[i].sequence_id = seqs[i].id;
        report.rows[i].truth = data.target_truth.at(i);
    }
    std::vector<bool> failed(n, false);
    for (const auto& e : routed.errors) {
        failed.at(e.position) = true;
        auto& row = report.rows[e.position];
        row.route = "Error";
        row.predictor = "default";
        row.label = 1;
        row.flagged = true;
    }
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) continue;
        const auto& d = routed.decisions.at(next++);
        report.rows[i].score = d.score;
        report.rows[i].route = std::string(routing::to_string(d.route));
    }
    report.general = routed.general.size();
    report.proprietary = routed.proprietary.size();
    report.route_errors = routed.errors.size();

    std::vector<training::Prediction> small;
    timed_stage("predict", &report.timings, [&] {
        if (!model) return;
        small.reserve(n);
        for (const auto& seq : seqs) {
            try {
                small.push_back(training::predict(*model, seq, data.embeddings));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptySequence && e.code() != ErrorCode::UnknownTemplate) throw;
                small.push_back({});
            }
        }
        for (const auto i : routed.general) {
            report.rows[i].predictor = "small_model";
            report.rows[i].label = small[i].label;
        }
    });

    rag::KnowledgeBase kb;
    timed_stage("build-kb", &report.timings, [&] {
        if (!model) return;
        std::vector<LogSequence> general;
        std::vector<training::Prediction> preds;
        for (const auto i : routed.general) {
            general.push_back(seqs[i]);
            preds.push_back(small[i]);
        }
        kb = rag::build_kb(general, preds, data.embeddings, data.catalog);
    });
    report.kb_size = kb.size();

    std::vector<rag::Verdict> verdicts;
    timed_stage("llm", &report.timings, [&] {
        for (const auto i : routed.proprietary) {
            auto v = rag::detect_proprietary(seqs[i], kb, client, data.embeddings, data.catalog, k);
            auto& row = report.rows[i];
            row.predictor = v.source;
            row.label = v.label;
            row.flagged = v.flagged;
            report.llm_calls += v.calls;
            verdicts.push_back(std::move(v));
        }
    });

    std::vector<int> labels(n);
    std::vector<std::size_t> everything(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = report.rows[i].label;
        everything[i] = i;
    }
    report.all = metrics_over(report.rows, labels, everything);
    report.on_general = metrics_over(report.rows, labels, routed.general);
    report.on_proprietary = metrics_over(report.rows, labels, routed.proprietary);
    if (model) {
        std::vector<int> small_labels(n);
        for (std::size_t i = 0; i < n; ++i) small_labels[i] = small[i].label;
        report.small_all = metrics_over(report.rows, small_labels, everything);
        report.small_general = metrics_over(report.rows, small_labels, routed.general);
        report.small_proprietary = metrics_over(report.rows, small_labels, routed.proprietary);
    }
    if (artifacts) {
        artifacts->routed = routed;
        artifacts->model = model;
        artifacts->kb = std::move(kb);
        artifacts->verdicts = std::move(verdicts);
        artifacts->small = std::move(small);
    }
    return report;
}

DetectionReport run_pipeline(const config::PipelineConfig& cfg, const std::filesystem::path& out_dir,
                             rag::LlmClient* client) {
    std::vector<StageTiming> timings;
    const auto data = prepare(cfg, &timings);
    const auto routed = timed_stage("route", &timings, [&] { return route_target(data, cfg.router); });
    bool loaded = false;
    const auto model = timed_stage("train", &timings, [&] { return obtain_model(cfg, data, routed.general, &loaded); });

    std::unique_ptr<rag::LlmClient> owned;
    if (client == nullptr) {
        owned = make_client(cfg);
        client = owned.get();
    }
    Artifacts artifacts;
    auto report = detect(data, routed, model, *client, cfg.rag_k, cfg.router.tau, &artifacts);
    report.model_loaded = loaded;
    timings.insert(timings.end(), report.timings.begin(), report.timings.end());
    report.timings = std::move(timings);

    if (!out_dir.empty()) {
        timed_stage("write", nullptr, [&] {
            std::filesystem::create_directories(out_dir);
            write_file(out_dir / "source_templates.tsv",
                       [&](std::ostream& o) { parsing::write_templates(o, data.source.templates); });
            write_file(out_dir / "target_templates.tsv",
                       [&](std::ostream& o) { parsing::write_templates(o, data.target.templates); });
            write_file(out_dir / "embeddings.tsv", [&](std::ostream& o) { embedding::write_embeddings(o, data.embeddings); });
            write_file(out_dir / "decisions.tsv", [&](std::ostream& o) { routing::write_decisions(o, routed.decisions); });
            if (model) {
                save_model(out_dir / "model.ckpt", *model);
                write_file(out_dir / "training_log.tsv",
                           [&](std::ostream& o) { training::write_training_log(o, model->history); });
            }
            rag::save_kb(out_dir / "kb.tsv", artifacts.kb);
            write_file(out_dir / "verdicts.tsv", [&](std::ostream& o) {
                for (const auto& v : artifacts.verdicts) {
                    o << v.sequence_id << '\t' << v.source << '\t' << v.label << '\t' << v.calls << '\t'
                      << (v.flagged ? 1 : 0) << '\t';
                    for (std::size_t j = 0; j < v.neighbors_used.size(); ++j) {
                        o << (j ? "," : "") << v.neighbors_used[j].first << ':'
                          << text::fixed(v.neighbors_used[j].second, 6);
                    }
                    o << '\t' << escape(v.raw_response) << '\t' << escape(v.note) << '\n';
                }
            });
            write_file(out_dir / "report.tsv", [&](std::ostream& o) { write_report(o, report); });
            write_file(out_dir / "timings.tsv", [&](std::ostream& o) { write_timings(o, report.timings); });
        });
    }
    return report;
}

void write_report(std::ostream& out, const DetectionReport& r) {
    out << "sequence_id\troute\tscore\tpredictor\tlabel\ttruth\tflagged\n";
    for (const auto& row : r.rows) {
        out << row.sequence_id << '\t' << row.route << '\t' << text::fixed(row.score, 6) << '\t' << row.predictor
            << '\t' << row.label << '\t' << (row.truth ? std::to_string(*row.truth) : "-") << '\t'
            << (row.flagged ? 1 : 0) << '\n';
    }
    out << '\n';
    out << "tau\t" << text::fixed(r.tau, 6) << '\n';
    out << "sequences\t" << r.rows.size() << '\n';
    out << "general\t" << r.general << '\n';
    out << "proprietary\t" << r.proprietary << '\n';
    out << "route_errors\t" << r.route_errors << '\n';
    out << "llm_calls\t" << r.llm_calls << '\n';
    out << "kb_size\t" << r.kb_size << '\n';
    put_metrics(out, "all", r.all);
    put_metrics(out, "general", r.on_general);
    put_metrics(out, "proprietary", r.on_proprietary);
    put_metrics(out, "small_model_all", r.small_all);
    put_metrics(out, "small_model_general", r.small_general);
    put_metrics(out, "small_model_proprietary", r.small_proprietary);
}

void write_timings(std::ostream& out, std::span<const StageTiming> timings) {
    out << "stage\tseconds\n";
    for (const auto& t : timings) out << t.stage << '\t' << text::fixed(t.seconds, 6) << '\n';
}

ParsedReport read_report(std::istream& in) {
    ParsedReport parsed;
    std::string line;
    std::size_t number = 1;
    if (!std::getline(in, line) || line != "sequence_id\troute\tscore\tpredictor\tlabel\ttruth\tflagged") {
        throw Error(ErrorCode::Io, "report: missing header");
    }
    const auto bad = [&number](const std::string& what) {
        return Error(ErrorCode::Io, "report line " + std::to_string(number) + ": " + what);
    };
    bool in_summary = false;
    while (std::getline(in, line)) {
        ++number;
        if (!in_summary && line.empty()) {
            in_summary = true;
            continue;
        }
        const auto fields = text::split(line, '\t');
        if (in_summary) {
            if (fields.size() != 2) throw bad("expected key<TAB>value");
            parsed.summary.emplace_back(fields[0], fields[1]);
            continue;
        }
        if (fields.size() != 7) throw bad("expected 7 fields");
        ReportRow row;
        row.sequence_id = fields[0];
        row.route = fields[1];
        row.predictor = fields[3];
        try {
            row.score = text::parse_double(fields[2]);
            row.label = static_cast<int>(text::parse_int(fields[4]));
            if (fields[5] != "-") row.truth = static_cast<int>(text::parse_int(fields[5]));
            row.flagged = text::parse_int(fields[6]) != 0;
        } catch (const Error& e) {
            throw bad(e.what());
        }
        parsed.rows.push_back(std::move(row));
    }
    return parsed;
}

std::vector<SweepRow> sweep_threshold(const config::PipelineConfig& cfg, std::span<const double> taus,
                                      rag::LlmClient* client) {
    if (taus.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one tau");
    for (const double t : taus) routing::RouterConfig{t}.validate();
    const auto data = prepare(cfg);
    for (std::size_t i = 0; i < data.target_truth.size(); ++i) {
        if (!data.target_truth[i]) {
            throw Error(ErrorCode::InvalidArgument,
                        "sweep needs ground truth; target sequence " + data.target.sequences[i].id + " has none");
        }
    }
    std::unique_ptr<rag::LlmClient> owned;
    if (client == nullptr) {
        owned = make_client(cfg);
        client = owned.get();
    }
    const auto scored = timed_stage("route", nullptr, [&] { return route_target(data, routing::RouterConfig{0.0}); });
    std::optional<training::TrainedModel> shared;
    if (!cfg.sweep_retrain) {
        const auto at_tau = routing::reroute(scored, cfg.router);
        shared = timed_stage("train", nullptr, [&] { return obtain_model(cfg, data, at_tau.general); });
    }

    std::vector<SweepRow> rows;
    for (const double tau : taus) {
        const auto routed = routing::reroute(scored, routing::RouterConfig{tau});
        std::optional<training::TrainedModel> retrained;
        if (cfg.sweep_retrain) {
            retrained = timed_stage("train", nullptr, [&]() -> std::optional<training::TrainedModel> {
                if (routed.general.empty()) return std::nullopt;
                return training::train(make_dataset(data, routed.general), cfg.train);
            });
        }
        const auto report = detect(data, routed, cfg.sweep_retrain ? retrained : shared, *client, cfg.rag_k, tau);
        SweepRow row;
        row.tau = tau;
        row.general = report.general;
        row.proprietary = report.proprietary;
        row.general_frac = static_cast<double>(report.general) / static_cast<double>(report.rows.size());
        row.f1_small_general = f1_or_zero(report.small_general);
        row.f1_small_proprietary = f1_or_zero(report.small_proprietary);
        row.f1_small_all = f1_or_zero(report.small_all);
        row.f1_pipeline_proprietary = f1_or_zero(report.on_proprietary);
        row.f1_pipeline_all = f1_or_zero(report.all);
        row.llm_calls = report.llm_calls;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows) {
    out << "tau\tgeneral\tproprietary\tgeneral_frac\tf1_small_general\tf1_small_proprietary\tf1_small_all"
           "\tf1_pipeline_proprietary\tf1_pipeline_all\tllm_calls\n";
    for (const auto& r : rows) {
        out << text::fixed(r.tau, 6) << '\t' << r.general << '\t' << r.proprietary << '\t'
            << text::fixed(r.general_frac, 6) << '\t' << text::fixed(r.f1_small_general, 6) << '\t'
            << text::fixed(r.f1_small_proprietary, 6) << '\t' << text::fixed(r.f1_small_all, 6) << '\t'
            << text::fixed(r.f1_pipeline_proprietary, 6) << '\t' << text::fixed(r.f1_pipeline_all, 6) << '\t'
            << r.llm_calls << '\n';
    }
}

void write_sweep_plot(std::ostream& out, std::span<const SweepRow> rows) {
    out << "tau\tgeneral_frac\tf1_general\tf1_proprietary\tf1_all\n";
    for (const auto& r : rows) {
        out << text::fixed(r.tau, 6) << '\t' << text::fixed(r.general_frac, 6) << '\t'
            << text::fixed(r.f1_small_general, 6) << '\t' << text::fixed(r.f1_small_proprietary, 6) << '\t'
            << text::fixed(r.f1_small_all, 6) << '\n';
    }
}

}  // namespace generallog::pipeline
