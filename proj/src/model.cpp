#include "generallog/neural/model.hpp"

#include "generallog/errors.hpp"
#include "generallog/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace generallog::neural {

namespace {

// Four independent partial sums; fixed order, so results are reproducible.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// out += W x
void matvec_add(const Tensor& w, const double* x, double* out) {
    const std::size_t rows = w.rows(), cols = w.cols();
    for (std::size_t i = 0; i < rows; ++i) out[i] += dot(w.data() + i * cols, x, cols);
}

// out += W^T v
void matvec_t_add(const Tensor& w, const double* v, double* out) {
    const std::size_t rows = w.rows(), cols = w.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const double* row = w.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * vi;
    }
}

// G += a b^T
void outer_add(Tensor& g, const double* a, const double* b) {
    const std::size_t rows = g.rows(), cols = g.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* row = g.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += ai * b[j];
    }
}

void add_to(Tensor& t, const double* v) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += v[i];
}

void check_finite(const std::vector<double>& values, const char* what) {
    for (const double x : values) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, std::string("non-finite ") + what);
    }
}

void require_same_shapes(const ModelParams& params, std::size_t input_dim) {
    const std::size_t h = params.extractor.hidden_dim();
    const auto& e = params.extractor;
    const bool ok = e.update_input.shape() == std::vector<std::size_t>{h, input_dim} &&
                    e.reset_input.same_shape(e.update_input) && e.candidate_input.same_shape(e.update_input) &&
                    e.update_recurrent.shape() == std::vector<std::size_t>{h, h} &&
                    e.reset_recurrent.same_shape(e.update_recurrent) &&
                    e.candidate_recurrent.same_shape(e.update_recurrent) &&
                    e.attention_proj.same_shape(e.update_recurrent) &&
                    params.anomaly.weight.shape() == std::vector<std::size_t>{h} &&
                    params.domain.weight.shape() == std::vector<std::size_t>{h};
    if (!ok) {
        throw Error(ErrorCode::ShapeMismatch, "model parameters do not fit input dim " +
                                                  std::to_string(input_dim) + " and hidden dim " +
                                                  std::to_string(h));
    }
}

template <typename Params>
void step_all(Params& params, const Params& grads, double lr) {
    std::vector<Tensor*> targets;
    params.for_each([&](std::string_view, Tensor& t) { targets.push_back(&t); });
    std::size_t k = 0;
    grads.for_each([&](std::string_view name, const Tensor& g) {
        Tensor& p = *targets[k++];
        if (!p.same_shape(g)) throw Error(ErrorCode::ShapeMismatch, "gradient shape differs for " + std::string(name));
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    });
}

}  // namespace

SequenceInput SequenceInput::from_rows(const std::vector<std::vector<double>>& rows) {
    SequenceInput out;
    out.length = rows.size();
    out.dim = rows.empty() ? 0 : rows.front().size();
    out.values.reserve(out.length * out.dim);
    for (const auto& row : rows) {
        if (row.size() != out.dim) throw Error(ErrorCode::ShapeMismatch, "ragged sequence input");
        out.values.insert(out.values.end(), row.begin(), row.end());
    }
    return out;
}

ExtractorParams ExtractorParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    const std::size_t d = input_dim, h = hidden_dim;
    return ExtractorParams{
        Tensor({h, d}), Tensor({h, h}), Tensor({h}),
        Tensor({h, d}), Tensor({h, h}), Tensor({h}),
        Tensor({h, d}), Tensor({h, h}), Tensor({h}),
        Tensor({h, h}), Tensor({h}),    Tensor({h}),
    };
}

LinearHead LinearHead::zeros(std::size_t hidden_dim) { return LinearHead{Tensor({hidden_dim}), Tensor({1})}; }

ModelParams ModelParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    return ModelParams{ExtractorParams::zeros(input_dim, hidden_dim), LinearHead::zeros(hidden_dim),
                       LinearHead::zeros(hidden_dim)};
}

ModelParams ModelParams::initialize(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    ModelParams params = zeros(input_dim, hidden_dim);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    params.for_each([&](std::string_view name, Tensor& t) {
        if (name.ends_with("bias")) return;
        for (auto& x : t.values()) x = rng.uniform(-bound, bound);
    });
    return params;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bce_with_logits(double logit, int label) {
    const double y = label != 0 ? 1.0 : 0.0;
    return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

double bce_with_logits_grad(double logit, int label) { return sigmoid(logit) - (label != 0 ? 1.0 : 0.0); }

double head_logit(const LinearHead& head, std::span<const double> rep) {
    if (rep.size() != head.weight.size()) {
        throw Error(ErrorCode::ShapeMismatch, "head expects " + std::to_string(head.weight.size()) +
                                                  " features, got " + std::to_string(rep.size()));
    }
    return dot(head.weight.data(), rep.data(), rep.size()) + head.bias[0];
}

ForwardRecord forward(const ModelParams& params, const SequenceInput& input) {
    const auto& e = params.extractor;
    const std::size_t T = input.length, d = input.dim, h = e.hidden_dim();
    if (T == 0) throw Error(ErrorCode::EmptySequence, "cannot run the extractor on an empty sequence");
    require_same_shapes(params, d);
    if (input.values.size() != T * d) throw Error(ErrorCode::ShapeMismatch, "sequence input block size");

    ForwardRecord rec;
    rec.input = &input;
    rec.hidden = h;
    rec.update.assign(T * h, 0.0);
    rec.reset.assign(T * h, 0.0);
    rec.candidate.assign(T * h, 0.0);
    rec.states.assign((T + 1) * h, 0.0);
    std::vector<double> reset_prev(h);

    for (std::size_t t = 0; t < T; ++t) {
        const double* x = input.values.data() + t * d;
        const double* prev = rec.states.data() + t * h;
        double* z = rec.update.data() + t * h;
        double* r = rec.reset.data() + t * h;
        double* c = rec.candidate.data() + t * h;
        double* next = rec.states.data() + (t + 1) * h;

        std::copy(e.update_bias.data(), e.update_bias.data() + h, z);
        matvec_add(e.update_input, x, z);
        matvec_add(e.update_recurrent, prev, z);
        std::copy(e.reset_bias.data(), e.reset_bias.data() + h, r);
        matvec_add(e.reset_input, x, r);
        matvec_add(e.reset_recurrent, prev, r);
        for (std::size_t i = 0; i < h; ++i) {
            z[i] = sigmoid(z[i]);
            r[i] = sigmoid(r[i]);
            reset_prev[i] = r[i] * prev[i];
        }
        std::copy(e.candidate_bias.data(), e.candidate_bias.data() + h, c);
        matvec_add(e.candidate_input, x, c);
        matvec_add(e.candidate_recurrent, reset_prev.data(), c);
        for (std::size_t i = 0; i < h; ++i) {
            c[i] = std::tanh(c[i]);
            next[i] = (1.0 - z[i]) * prev[i] + z[i] * c[i];
        }
    }

    rec.attn_hidden.assign(T * h, 0.0);
    rec.attn_weights.assign(T, 0.0);
    std::vector<double> scores(T);
    for (std::size_t t = 0; t < T; ++t) {
        double* u = rec.attn_hidden.data() + t * h;
        std::copy(e.attention_bias.data(), e.attention_bias.data() + h, u);
        matvec_add(e.attention_proj, rec.states.data() + (t + 1) * h, u);
        for (std::size_t i = 0; i < h; ++i) u[i] = std::tanh(u[i]);
        scores[t] = dot(e.attention_query.data(), u, h);
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        rec.attn_weights[t] = std::exp(scores[t] - top);
        total += rec.attn_weights[t];
    }
    rec.rep.assign(h, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        rec.attn_weights[t] /= total;
        const double a = rec.attn_weights[t];
        const double* ht = rec.states.data() + (t + 1) * h;
        for (std::size_t i = 0; i < h; ++i) rec.rep[i] += a * ht[i];
    }

    rec.anomaly_logit = head_logit(params.anomaly, rec.rep);
    rec.domain_logit = head_logit(params.domain, rec.rep);
    check_finite(rec.states, "GRU hidden state");
    check_finite(rec.rep, "attention output");
    if (!std::isfinite(rec.anomaly_logit) || !std::isfinite(rec.domain_logit)) {
        throw Error(ErrorCode::NonFinite, "non-finite head logit");
    }
    return rec;
}

std::vector<std::vector<double>> gru_forward(const ExtractorParams& params, const SequenceInput& input) {
    const std::size_t h = params.hidden_dim();
    const ModelParams wrapped{params, LinearHead::zeros(h), LinearHead::zeros(h)};
    const auto rec = forward(wrapped, input);
    std::vector<std::vector<double>> hiddens;
    for (std::size_t t = 1; t <= input.length; ++t) {
        hiddens.emplace_back(rec.states.begin() + static_cast<std::ptrdiff_t>(t * h),
                             rec.states.begin() + static_cast<std::ptrdiff_t>((t + 1) * h));
    }
    return hiddens;
}

AttentionPool attention_pool(const ExtractorParams& params, const std::vector<std::vector<double>>& hiddens) {
    if (hiddens.empty()) throw Error(ErrorCode::EmptySequence, "attention over zero time steps");
    const std::size_t h = params.hidden_dim();
    std::vector<double> scores;
    for (const auto& ht : hiddens) {
        if (ht.size() != h) throw Error(ErrorCode::ShapeMismatch, "hidden state size differs from attention size");
        std::vector<double> u(params.attention_bias.values().begin(), params.attention_bias.values().end());
        matvec_add(params.attention_proj, ht.data(), u.data());
        for (auto& x : u) x = std::tanh(x);
        scores.push_back(dot(params.attention_query.data(), u.data(), h));
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    AttentionPool out;
    double total = 0.0;
    for (const double s : scores) {
        out.weights.push_back(std::exp(s - top));
        total += out.weights.back();
    }
    out.rep.assign(h, 0.0);
    for (std::size_t t = 0; t < hiddens.size(); ++t) {
        out.weights[t] /= total;
        for (std::size_t i = 0; i < h; ++i) out.rep[i] += out.weights[t] * hiddens[t][i];
    }
    return out;
}

void backward(const ModelParams& params, const ForwardRecord& rec, double d_anomaly_logit,
              double d_domain_logit, Gradients& grads, bool through_extractor) {
    const auto& e = params.extractor;
    auto& g = grads.extractor;
    const std::size_t h = rec.hidden, T = rec.length(), d = rec.input->dim;

    for (std::size_t i = 0; i < h; ++i) {
        grads.anomaly.weight[i] += d_anomaly_logit * rec.rep[i];
        grads.domain.weight[i] += d_domain_logit * rec.rep[i];
    }
    grads.anomaly.bias[0] += d_anomaly_logit;
    grads.domain.bias[0] += d_domain_logit;
    if (!through_extractor) return;

    std::vector<double> d_rep(h);
    for (std::size_t i = 0; i < h; ++i) {
        d_rep[i] = d_anomaly_logit * params.anomaly.weight[i] + d_domain_logit * params.domain.weight[i];
    }

    // Attention pooling.
    std::vector<double> d_states(T * h, 0.0);
    std::vector<double> d_weight(T);
    double weighted = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        d_weight[t] = dot(d_rep.data(), rec.states.data() + (t + 1) * h, h);
        weighted += rec.attn_weights[t] * d_weight[t];
    }
    std::vector<double> d_pre(h);
    for (std::size_t t = 0; t < T; ++t) {
        const double a = rec.attn_weights[t];
        const double d_score = a * (d_weight[t] - weighted);
        const double* u = rec.attn_hidden.data() + t * h;
        const double* ht = rec.states.data() + (t + 1) * h;
        double* dh = d_states.data() + t * h;
        for (std::size_t i = 0; i < h; ++i) {
            dh[i] += a * d_rep[i];
            g.attention_query[i] += d_score * u[i];
            d_pre[i] = d_score * e.attention_query[i] * (1.0 - u[i] * u[i]);
        }
        outer_add(g.attention_proj, d_pre.data(), ht);
        add_to(g.attention_bias, d_pre.data());
        matvec_t_add(e.attention_proj, d_pre.data(), dh);
    }

    // GRU, back through time.
    std::vector<double> d_next(h, 0.0), d_prev(h), d_cand_pre(h), d_update_pre(h), d_reset_pre(h);
    std::vector<double> d_reset_prev(h), reset_prev(h);
    for (std::size_t step = T; step-- > 0;) {
        const double* x = rec.input->values.data() + step * d;
        const double* prev = rec.states.data() + step * h;
        const double* z = rec.update.data() + step * h;
        const double* r = rec.reset.data() + step * h;
        const double* c = rec.candidate.data() + step * h;
        const double* dh_out = d_states.data() + step * h;

        for (std::size_t i = 0; i < h; ++i) {
            const double dh = dh_out[i] + d_next[i];
            const double dz = dh * (c[i] - prev[i]);
            const double dc = dh * z[i];
            d_prev[i] = dh * (1.0 - z[i]);
            d_cand_pre[i] = dc * (1.0 - c[i] * c[i]);
            d_update_pre[i] = dz * z[i] * (1.0 - z[i]);
            reset_prev[i] = r[i] * prev[i];
            d_reset_prev[i] = 0.0;
        }
        outer_add(g.candidate_input, d_cand_pre.data(), x);
        outer_add(g.candidate_recurrent, d_cand_pre.data(), reset_prev.data());
        add_to(g.candidate_bias, d_cand_pre.data());
        matvec_t_add(e.candidate_recurrent, d_cand_pre.data(), d_reset_prev.data());
        for (std::size_t i = 0; i < h; ++i) {
            d_reset_pre[i] = d_reset_prev[i] * prev[i] * r[i] * (1.0 - r[i]);
            d_prev[i] += d_reset_prev[i] * r[i];
        }
        outer_add(g.update_input, d_update_pre.data(), x);
        outer_add(g.update_recurrent, d_update_pre.data(), prev);
        add_to(g.update_bias, d_update_pre.data());
        matvec_t_add(e.update_recurrent, d_update_pre.data(), d_prev.data());
        outer_add(g.reset_input, d_reset_pre.data(), x);
        outer_add(g.reset_recurrent, d_reset_pre.data(), prev);
        add_to(g.reset_bias, d_reset_pre.data());
        matvec_t_add(e.reset_recurrent, d_reset_pre.data(), d_prev.data());
        d_next.swap(d_prev);
    }
}

void require_finite(const Gradients& grads) {
    grads.for_each([](std::string_view name, const Tensor& t) { t.require_finite(name); });
}

void sgd_step(ExtractorParams& params, const ExtractorParams& grads, double lr) { step_all(params, grads, lr); }
void sgd_step(LinearHead& params, const LinearHead& grads, double lr) { step_all(params, grads, lr); }
void sgd_step(ModelParams& params, const ModelParams& grads, double lr) { step_all(params, grads, lr); }

void accumulate(ExtractorParams& into, const ExtractorParams& from, double scale) {
    step_all(into, from, -scale);
}

}  // namespace generallog::neural
