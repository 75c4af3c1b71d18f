#pragma once

#include <cstddef>
#include <span>

namespace generallog {

/// Precision, recall and F1 in percent. A zero denominator yields 0 and sets
/// the matching flag.
struct Metrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;

    [[nodiscard]] std::size_t total() const { return tp + fp + fn + tn; }
};

/// Harmonic mean of two percentages; 0 when both are 0.
double f1_score(double precision, double recall);

/// Labels are 0/1. Throws Error(LengthMismatch).
Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth);

}  // namespace generallog
