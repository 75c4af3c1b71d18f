#pragma once

#include "generallog/neural/tensor.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace generallog::neural {

/// A sequence of input vectors stored as one row-major (length x dim) block.
struct SequenceInput {
    std::size_t length = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    [[nodiscard]] std::span<const double> step(std::size_t t) const {
        return std::span<const double>(values).subspan(t * dim, dim);
    }
    static SequenceInput from_rows(const std::vector<std::vector<double>>& rows);
};

/// GRU gates and the additive attention pooling layer.
///
/// Input matrices are (hidden x input), recurrent and attention projection
/// matrices (hidden x hidden), biases and the attention query are vectors of
/// length hidden.
struct ExtractorParams {
    Tensor update_input, update_recurrent, update_bias;
    Tensor reset_input, reset_recurrent, reset_bias;
    Tensor candidate_input, candidate_recurrent, candidate_bias;
    Tensor attention_proj, attention_bias, attention_query;

    static ExtractorParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    [[nodiscard]] std::size_t input_dim() const { return update_input.cols(); }
    [[nodiscard]] std::size_t hidden_dim() const { return update_input.rows(); }

    template <typename F>
    void for_each(F&& f) { visit(*this, f); }
    template <typename F>
    void for_each(F&& f) const { visit(*this, f); }

    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        f("gru.update_input", self.update_input);
        f("gru.update_recurrent", self.update_recurrent);
        f("gru.update_bias", self.update_bias);
        f("gru.reset_input", self.reset_input);
        f("gru.reset_recurrent", self.reset_recurrent);
        f("gru.reset_bias", self.reset_bias);
        f("gru.candidate_input", self.candidate_input);
        f("gru.candidate_recurrent", self.candidate_recurrent);
        f("gru.candidate_bias", self.candidate_bias);
        f("attention.proj", self.attention_proj);
        f("attention.bias", self.attention_bias);
        f("attention.query", self.attention_query);
    }

    friend bool operator==(const ExtractorParams&, const ExtractorParams&) = default;
};

/// Linear classifier on the pooled representation: weight . rep + bias.
struct LinearHead {
    Tensor weight;  // [hidden]
    Tensor bias;    // [1]

    static LinearHead zeros(std::size_t hidden_dim);

    template <typename F>
    void for_each(F&& f) {
        f("weight", weight);
        f("bias", bias);
    }
    template <typename F>
    void for_each(F&& f) const {
        f("weight", weight);
        f("bias", bias);
    }

    friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

/// Feature extractor plus the anomaly and domain heads. Also used as the
/// gradient container: gradients share names and shapes with parameters.
struct ModelParams {
    ExtractorParams extractor;
    LinearHead anomaly;
    LinearHead domain;

    static ModelParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    /// Weights uniform in [-1/sqrt(h), 1/sqrt(h)], biases zero.
    static ModelParams initialize(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

    template <typename F>
    void for_each(F&& f) { visit(*this, f); }
    template <typename F>
    void for_each(F&& f) const { visit(*this, f); }

    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        self.extractor.for_each(f);
        f("anomaly_head.weight", self.anomaly.weight);
        f("anomaly_head.bias", self.anomaly.bias);
        f("domain_head.weight", self.domain.weight);
        f("domain_head.bias", self.domain.bias);
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

double sigmoid(double x);

/// Hidden states h_1..h_T with h_0 = 0.
std::vector<std::vector<double>> gru_forward(const ExtractorParams& params, const SequenceInput& input);

struct AttentionPool {
    std::vector<double> rep;
    std::vector<double> weights;
};

/// score_t = query . tanh(proj h_t + bias); weights = softmax(score); rep = sum_t weights_t h_t.
AttentionPool attention_pool(const ExtractorParams& params, const std::vector<std::vector<double>>& hiddens);

double head_logit(const LinearHead& head, std::span<const double> rep);

/// max(z, 0) - z y + ln(1 + e^{-|z|})
double bce_with_logits(double logit, int label);
/// d bce / d logit = sigmoid(z) - y
double bce_with_logits_grad(double logit, int label);

/// Intermediates of one forward pass, kept for the backward pass. The input
/// must outlive the record.
struct ForwardRecord {
    const SequenceInput* input = nullptr;
    std::size_t hidden = 0;
    std::vector<double> update, reset, candidate;  // T x h
    std::vector<double> states;                    // (T + 1) x h, row 0 is h_0
    std::vector<double> attn_hidden;               // T x h, tanh(proj h_t + bias)
    std::vector<double> attn_weights;              // T
    std::vector<double> rep;                       // h
    double anomaly_logit = 0.0;
    double domain_logit = 0.0;

    [[nodiscard]] std::size_t length() const { return attn_weights.size(); }
};

/// Throws Error(ShapeMismatch), Error(EmptySequence) or Error(NonFinite).
ForwardRecord forward(const ModelParams& params, const SequenceInput& input);

/// Accumulates into `grads` the gradient of
/// (d_anomaly_logit * anomaly_logit + d_domain_logit * domain_logit).
/// With `through_extractor` false only the head gradients are accumulated.
void backward(const ModelParams& params, const ForwardRecord& record, double d_anomaly_logit,
              double d_domain_logit, Gradients& grads, bool through_extractor = true);

/// Throws Error(NonFinite) naming the first offending parameter.
void require_finite(const Gradients& grads);

/// p <- p - lr * g for every tensor. Throws Error(ShapeMismatch).
void sgd_step(ExtractorParams& params, const ExtractorParams& grads, double lr);
void sgd_step(LinearHead& params, const LinearHead& grads, double lr);
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

/// a <- a + scale * b, tensor by tensor.
void accumulate(ExtractorParams& into, const ExtractorParams& from, double scale = 1.0);

}  // namespace generallog::neural
