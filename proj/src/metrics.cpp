#include "generallog/metrics.hpp"

#include "generallog/errors.hpp"

#include <string>

namespace generallog {

double f1_score(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                   std::to_string(truth.size()) + " labels");
    }
    Metrics m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == 1, t = truth[i] == 1;
        if (p && t) ++m.tp;
        else if (p) ++m.fp;
        else if (t) ++m.fn;
        else ++m.tn;
    }
    m.precision_undefined = m.tp + m.fp == 0;
    m.recall_undefined = m.tp + m.fn == 0;
    if (!m.precision_undefined) m.precision = 100.0 * static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (!m.recall_undefined) m.recall = 100.0 * static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

}  // namespace generallog
