#pragma once

#include "generallog/event_embedding.hpp"
#include "generallog/log_sequence.hpp"
#include "generallog/neural/model.hpp"
#include "generallog/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace generallog::training {

using neural::ExtractorParams;
using neural::Gradients;
using neural::LinearHead;
using neural::ModelParams;
using neural::SequenceInput;

/// Looks up each event's embedding and rescales it to norm sqrt(d), so every
/// coordinate has unit RMS; zero vectors stay zero.
/// Throws Error(EmptySequence) or Error(UnknownTemplate).
SequenceInput encode(const LogSequence& seq, const embedding::EmbeddingMap& embeddings);

/// Labeled source sequences and unlabeled target sequences, already encoded.
struct DomainDataset {
    std::vector<SequenceInput> source;
    std::vector<int> source_labels;
    std::vector<SequenceInput> target;

    void validate() const;
    [[nodiscard]] std::size_t input_dim() const;
};

struct TrainConfig {
    double delta = 0.1;    // inner learning rate
    double alpha = 0.5;    // meta step size
    double beta = 0.1;     // adversarial weight
    double gamma = 1.0;    // classification weight
    std::size_t inner_steps = 1;
    std::size_t tasks_per_meta_batch = 4;
    std::size_t support_size = 32;
    std::size_t query_size = 32;
    std::size_t epochs = 100;
    std::uint64_t seed = 7;
    double head_lr = 1.0;
    std::size_t hidden_dim = 64;
    double decision_threshold = 0.5;

    void validate() const;
};

/// Indices into a DomainDataset.
struct TaskSide {
    std::vector<std::size_t> source;
    std::vector<std::size_t> target;
};

struct MetaTask {
    std::size_t id = 0;
    TaskSide support;
    TaskSide query;
    bool unstratified = false;  // source sample had only one class
};

/// Stratified source split (disjoint support/query), uniform target draws.
/// Throws Error(InsufficientData).
MetaTask sample_meta_task(const DomainDataset& data, const TrainConfig& cfg, Rng& rng, std::size_t task_id = 0);

struct SideLosses {
    double classification = 0.0;  // mean BCE of the anomaly head over source items
    double domain = 0.0;          // mean BCE of the domain head, source = 0, target = 1
};

/// Evaluates both losses on one side of a task and, when `grads` is given,
/// accumulates the gradient of (class_coef * L_c + domain_coef * L_ad).
/// A coefficient of zero skips the corresponding loss requirement.
SideLosses evaluate_side(const ModelParams& params, const DomainDataset& data, const TaskSide& side,
                         double class_coef, double domain_coef, Gradients* grads,
                         bool through_extractor = true);

/// Throws Error(OneDomainOnly).
double domain_loss(const DomainDataset& data, const TaskSide& side, const ExtractorParams& extractor,
                   const LinearHead& domain_head);
/// Throws Error(NoLabels).
double class_loss(const DomainDataset& data, const TaskSide& side, const ExtractorParams& extractor,
                  const LinearHead& anomaly_head);

/// gamma * L_c - beta * L_ad
inline double task_objective(const SideLosses& l, const TrainConfig& cfg) {
    return cfg.gamma * l.classification - cfg.beta * l.domain;
}

/// Gradient of the task objective with respect to the extractor only (heads frozen).
ExtractorParams objective_gradient(const ModelParams& params, const DomainDataset& data, const TaskSide& side,
                                   const TrainConfig& cfg, SideLosses* losses = nullptr);

/// `inner_steps` SGD steps of rate delta on the support objective, on a copy
/// of the extractor. Throws Error(DivergedTask).
ExtractorParams inner_adapt(const ExtractorParams& extractor, const TaskSide& support, const LinearHead& anomaly_head,
                            const LinearHead& domain_head, const DomainDataset& data, const TrainConfig& cfg,
                            std::size_t task_id = 0);

struct MetaStepResult {
    ExtractorParams extractor;
    double mean_query_objective = 0.0;
    std::size_t diverged = 0;
};

/// First-order meta update: the query gradient at each adapted extractor is
/// summed over tasks in task order and applied with rate alpha.
/// Throws Error(MetaStepFailed) when every task diverges.
MetaStepResult meta_step(const ExtractorParams& extractor, std::span<const MetaTask> tasks,
                         const LinearHead& anomaly_head, const LinearHead& domain_head, const DomainDataset& data,
                         const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;
    double class_loss = 0.0;
    double domain_loss = 0.0;
    double meta_objective = 0.0;
};

struct TrainedModel {
    ModelParams params;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    TrainConfig config;
    double decision_threshold = 0.5;
    std::vector<EpochLog> history;
};

TrainedModel initialize_model(std::size_t input_dim, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Per epoch: sample tasks, descend L_ad for the domain head and L_c for the
/// anomaly head on the support sets, then one meta step for the extractor.
TrainedModel train(const DomainDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Prediction {
    double probability = 0.5;
    int label = 1;
};

Prediction predict(const TrainedModel& model, const SequenceInput& input);
Prediction predict(const TrainedModel& model, const LogSequence& seq, const embedding::EmbeddingMap& embeddings);

/// "epoch\tL_c\tL_ad\tmeta_objective" per line.
void write_training_log(std::ostream& out, std::span<const EpochLog> history);

}  // namespace generallog::training
