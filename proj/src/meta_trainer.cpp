#include "generallog/meta_trainer.hpp"

#include "generallog/errors.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace generallog::training {

namespace {

using neural::ForwardRecord;

ModelParams with_extractor(const ExtractorParams& extractor, const LinearHead& anomaly, const LinearHead& domain) {
    return ModelParams{extractor, anomaly, domain};
}

std::vector<std::size_t> take(const std::vector<std::size_t>& from, std::size_t begin, std::size_t count) {
    return {from.begin() + static_cast<std::ptrdiff_t>(begin),
            from.begin() + static_cast<std::ptrdiff_t>(begin + count)};
}

}  // namespace

SequenceInput encode(const LogSequence& seq, const embedding::EmbeddingMap& embeddings) {
    if (seq.template_ids.empty()) throw Error(ErrorCode::EmptySequence, "sequence '" + seq.id + "' is empty");
    SequenceInput out;
    out.length = seq.template_ids.size();
    for (const auto id : seq.template_ids) {
        const auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::UnknownTemplate, "template id " + std::to_string(id) + " in sequence '" +
                                                        seq.id + "' has no embedding");
        }
        const auto& e = it->second;
        out.dim = e.vector.size();
        const double scale = e.norm > 0.0 ? std::sqrt(static_cast<double>(out.dim)) / e.norm : 0.0;
        for (const double x : e.vector) out.values.push_back(x * scale);
    }
    return out;
}

void DomainDataset::validate() const {
    if (source.empty()) throw Error(ErrorCode::InsufficientData, "no source sequences");
    if (target.empty()) throw Error(ErrorCode::InsufficientData, "no target sequences");
    if (source.size() != source_labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "source sequences and labels differ in count");
    }
    for (const int y : source_labels) {
        if (y != 0 && y != 1) throw Error(ErrorCode::InvalidArgument, "source labels must be 0 or 1");
    }
    const std::size_t d = input_dim();
    auto check = [d](const SequenceInput& s) {
        if (s.length == 0) throw Error(ErrorCode::EmptySequence, "empty sequence in training data");
        if (s.dim != d) throw Error(ErrorCode::DimensionMismatch, "mixed input dimensions in training data");
    };
    std::for_each(source.begin(), source.end(), check);
    std::for_each(target.begin(), target.end(), check);
}

std::size_t DomainDataset::input_dim() const {
    if (!source.empty()) return source.front().dim;
    return target.empty() ? 0 : target.front().dim;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::Config, what);
    };
    require(delta >= 0.0, "train.delta must be >= 0");
    require(alpha >= 0.0, "train.alpha must be >= 0");
    require(beta >= 0.0, "train.beta must be >= 0");
    require(gamma >= 0.0, "train.gamma must be >= 0");
    require(inner_steps >= 1, "train.inner_steps must be >= 1");
    require(tasks_per_meta_batch >= 1, "train.tasks_per_meta_batch must be >= 1");
    require(support_size >= 2 && query_size >= 2, "train.support_size and train.query_size must be >= 2");
    require(head_lr > 0.0, "train.head_lr must be > 0");
    require(hidden_dim >= 1, "train.hidden_dim must be >= 1");
    require(decision_threshold > 0.0 && decision_threshold < 1.0, "train.decision_threshold must lie in (0, 1)");
}

MetaTask sample_meta_task(const DomainDataset& data, const TrainConfig& cfg, Rng& rng, std::size_t task_id) {
    const std::size_t support = cfg.support_size, query = cfg.query_size;
    if (data.source.size() < support + query) {
        throw Error(ErrorCode::InsufficientData, "source has " + std::to_string(data.source.size()) +
                                                     " sequences, a task needs " + std::to_string(support + query));
    }
    if (data.target.empty()) throw Error(ErrorCode::InsufficientData, "no target sequences to sample");

    MetaTask task;
    task.id = task_id;
    std::vector<std::size_t> anomalies, normals;
    for (std::size_t i = 0; i < data.source.size(); ++i) {
        (data.source_labels[i] == 1 ? anomalies : normals).push_back(i);
    }
    rng.shuffle(anomalies);
    rng.shuffle(normals);

    if (anomalies.empty() || normals.empty()) {
        task.unstratified = true;
        std::vector<std::size_t> all = anomalies.empty() ? normals : anomalies;
        task.support.source = take(all, 0, support);
        task.query.source = take(all, support, query);
    } else {
        const double prevalence = static_cast<double>(anomalies.size()) / static_cast<double>(data.source.size());
        auto a_sup = static_cast<std::size_t>(std::llround(static_cast<double>(support) * prevalence));
        auto a_que = static_cast<std::size_t>(std::llround(static_cast<double>(query) * prevalence));
        a_sup = std::max<std::size_t>(a_sup, 1);
        if (anomalies.size() >= 2) a_que = std::max<std::size_t>(a_que, 1);
        if (normals.size() >= 2) {
            a_sup = std::min(a_sup, support - 1);
            a_que = std::min(a_que, query - 1);
        }
        while (a_sup + a_que > anomalies.size()) (a_que > 0 ? a_que : a_sup)--;
        while ((support - a_sup) + (query - a_que) > normals.size()) {
            if (a_sup + a_que >= anomalies.size()) {
                throw Error(ErrorCode::InsufficientData, "cannot fill task sides with the available source sequences");
            }
            (support - a_sup >= query - a_que ? a_sup : a_que)++;
        }
        task.support.source = take(anomalies, 0, a_sup);
        const auto sup_normals = take(normals, 0, support - a_sup);
        task.support.source.insert(task.support.source.end(), sup_normals.begin(), sup_normals.end());
        task.query.source = take(anomalies, a_sup, a_que);
        const auto que_normals = take(normals, support - a_sup, query - a_que);
        task.query.source.insert(task.query.source.end(), que_normals.begin(), que_normals.end());
        rng.shuffle(task.support.source);
        rng.shuffle(task.query.source);
    }

    std::vector<std::size_t> targets(data.target.size());
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
    rng.shuffle(targets);
    if (targets.size() >= support + query) {
        task.support.target = take(targets, 0, support);
        task.query.target = take(targets, support, query);
    } else {
        for (std::size_t i = 0; i < support; ++i) task.support.target.push_back(rng.below(targets.size()));
        for (std::size_t i = 0; i < query; ++i) task.query.target.push_back(rng.below(targets.size()));
    }
    return task;
}

SideLosses evaluate_side(const ModelParams& params, const DomainDataset& data, const TaskSide& side,
                         double class_coef, double domain_coef, Gradients* grads, bool through_extractor) {
    if (side.source.empty()) throw Error(ErrorCode::NoLabels, "task side has no labeled source sequences");
    if (side.target.empty()) throw Error(ErrorCode::OneDomainOnly, "task side has no target sequences");

    const double n_source = static_cast<double>(side.source.size());
    const double n_all = n_source + static_cast<double>(side.target.size());
    SideLosses losses;
    for (const auto i : side.source) {
        const auto rec = neural::forward(params, data.source[i]);
        const int y = data.source_labels[i];
        losses.classification += neural::bce_with_logits(rec.anomaly_logit, y) / n_source;
        losses.domain += neural::bce_with_logits(rec.domain_logit, 0) / n_all;
        if (grads != nullptr) {
            const double d_anomaly = class_coef * neural::bce_with_logits_grad(rec.anomaly_logit, y) / n_source;
            const double d_domain = domain_coef * neural::bce_with_logits_grad(rec.domain_logit, 0) / n_all;
            neural::backward(params, rec, d_anomaly, d_domain, *grads, through_extractor);
        }
    }
    for (const auto i : side.target) {
        const auto rec = neural::forward(params, data.target[i]);
        losses.domain += neural::bce_with_logits(rec.domain_logit, 1) / n_all;
        if (grads != nullptr) {
            const double d_domain = domain_coef * neural::bce_with_logits_grad(rec.domain_logit, 1) / n_all;
            neural::backward(params, rec, 0.0, d_domain, *grads, through_extractor);
        }
    }
    return losses;
}

double domain_loss(const DomainDataset& data, const TaskSide& side, const ExtractorParams& extractor,
                   const LinearHead& domain_head) {
    if (side.source.empty() || side.target.empty()) {
        throw Error(ErrorCode::OneDomainOnly, "domain loss needs both source and target sequences");
    }
    const std::size_t h = extractor.hidden_dim();
    const auto params = with_extractor(extractor, LinearHead::zeros(h), domain_head);
    return evaluate_side(params, data, side, 0.0, 0.0, nullptr).domain;
}

double class_loss(const DomainDataset& data, const TaskSide& side, const ExtractorParams& extractor,
                  const LinearHead& anomaly_head) {
    if (side.source.empty()) throw Error(ErrorCode::NoLabels, "class loss needs labeled source sequences");
    const std::size_t h = extractor.hidden_dim();
    const auto params = with_extractor(extractor, anomaly_head, LinearHead::zeros(h));
    const double n = static_cast<double>(side.source.size());
    double loss = 0.0;
    for (const auto i : side.source) {
        loss += neural::bce_with_logits(neural::forward(params, data.source[i]).anomaly_logit, data.source_labels[i]) / n;
    }
    return loss;
}

ExtractorParams objective_gradient(const ModelParams& params, const DomainDataset& data, const TaskSide& side,
                                   const TrainConfig& cfg, SideLosses* losses) {
    Gradients grads = ModelParams::zeros(params.extractor.input_dim(), params.extractor.hidden_dim());
    const auto l = evaluate_side(params, data, side, cfg.gamma, -cfg.beta, &grads);
    if (losses != nullptr) *losses = l;
    return std::move(grads.extractor);
}

ExtractorParams inner_adapt(const ExtractorParams& extractor, const TaskSide& support, const LinearHead& anomaly_head,
                            const LinearHead& domain_head, const DomainDataset& data, const TrainConfig& cfg,
                            std::size_t task_id) {
    ModelParams params = with_extractor(extractor, anomaly_head, domain_head);
    try {
        for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
            SideLosses losses;
            const auto grad = objective_gradient(params, data, support, cfg, &losses);
            if (!std::isfinite(task_objective(losses, cfg))) throw Error(ErrorCode::NonFinite, "support objective");
            grad.for_each([](std::string_view name, const neural::Tensor& t) { t.require_finite(name); });
            neural::sgd_step(params.extractor, grad, cfg.delta);
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFinite) throw;
        throw Error(ErrorCode::DivergedTask, "task " + std::to_string(task_id) + " diverged: " + e.what());
    }
    return std::move(params.extractor);
}

MetaStepResult meta_step(const ExtractorParams& extractor, std::span<const MetaTask> tasks,
                         const LinearHead& anomaly_head, const LinearHead& domain_head, const DomainDataset& data,
                         const TrainConfig& cfg) {
    if (tasks.empty()) throw Error(ErrorCode::InvalidArgument, "meta step over zero tasks");
    auto meta_grad = ExtractorParams::zeros(extractor.input_dim(), extractor.hidden_dim());
    MetaStepResult result;
    std::size_t used = 0;
    for (const auto& task : tasks) {
        try {
            const auto adapted = inner_adapt(extractor, task.support, anomaly_head, domain_head, data, cfg, task.id);
            SideLosses losses;
            const auto grad = objective_gradient(with_extractor(adapted, anomaly_head, domain_head), data,
                                                 task.query, cfg, &losses);
            const double objective = task_objective(losses, cfg);
            if (!std::isfinite(objective)) throw Error(ErrorCode::DivergedTask, "query objective of task " + std::to_string(task.id));
            grad.for_each([](std::string_view name, const neural::Tensor& t) { t.require_finite(name); });
            neural::accumulate(meta_grad, grad);
            result.mean_query_objective += objective;
            ++used;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DivergedTask && e.code() != ErrorCode::NonFinite) throw;
            ++result.diverged;
        }
    }
    if (used == 0) throw Error(ErrorCode::MetaStepFailed, "all " + std::to_string(tasks.size()) + " tasks diverged");
    result.mean_query_objective /= static_cast<double>(used);
    result.extractor = extractor;
    neural::sgd_step(result.extractor, meta_grad, cfg.alpha);
    return result;
}

TrainedModel initialize_model(std::size_t input_dim, const TrainConfig& cfg) {
    TrainedModel model;
    model.params = ModelParams::initialize(input_dim, cfg.hidden_dim, cfg.seed);
    model.input_dim = input_dim;
    model.hidden_dim = cfg.hidden_dim;
    model.config = cfg;
    model.decision_threshold = cfg.decision_threshold;
    return model;
}

TrainedModel train(const DomainDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    data.validate();
    TrainedModel model = initialize_model(data.input_dim(), cfg);
    // Task sampling draws from its own stream so initialization and sampling
    // stay independent.
    Rng rng(mix64(cfg.seed ^ 0x7461736b73ULL));
    const std::size_t h = cfg.hidden_dim, d = model.input_dim;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<MetaTask> tasks;
        for (std::size_t k = 0; k < cfg.tasks_per_meta_batch; ++k) {
            tasks.push_back(sample_meta_task(data, cfg, rng, (epoch - 1) * cfg.tasks_per_meta_batch + k));
        }

        Gradients head_grads = ModelParams::zeros(d, h);
        EpochLog log;
        log.epoch = epoch;
        for (const auto& task : tasks) {
            const auto losses = evaluate_side(model.params, data, task.support, 1.0, 1.0, &head_grads, false);
            log.class_loss += losses.classification;
            log.domain_loss += losses.domain;
        }
        const double n_tasks = static_cast<double>(tasks.size());
        log.class_loss /= n_tasks;
        log.domain_loss /= n_tasks;
        neural::sgd_step(model.params.domain, head_grads.domain, cfg.head_lr / n_tasks);
        neural::sgd_step(model.params.anomaly, head_grads.anomaly, cfg.head_lr / n_tasks);

        auto step = meta_step(model.params.extractor, tasks, model.params.anomaly, model.params.domain, data, cfg);
        model.params.extractor = std::move(step.extractor);
        log.meta_objective = step.mean_query_objective;
        model.history.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    return model;
}

Prediction predict(const TrainedModel& model, const SequenceInput& input) {
    const auto rec = neural::forward(model.params, input);
    Prediction p;
    p.probability = neural::sigmoid(rec.anomaly_logit);
    p.label = p.probability >= model.decision_threshold ? 1 : 0;
    return p;
}

Prediction predict(const TrainedModel& model, const LogSequence& seq, const embedding::EmbeddingMap& embeddings) {
    return predict(model, encode(seq, embeddings));
}

void write_training_log(std::ostream& out, std::span<const EpochLog> history) {
    for (const auto& e : history) {
        out << e.epoch << '\t' << text::fixed(e.class_loss, 9) << '\t' << text::fixed(e.domain_loss, 9) << '\t'
            << text::fixed(e.meta_objective, 9) << '\n';
    }
}

}  // namespace generallog::training
