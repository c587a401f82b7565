#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "ecgbeatnet/wfdb.hpp"

namespace ecg::metrics {

// 5x5 confusion counts; rows are the true class, columns the predicted class.
struct ConfusionMatrix {
    std::array<std::array<uint64_t, 5>, 5> counts{};

    void accumulate(wfdb::BeatClass truth, wfdb::BeatClass pred) {
        counts[static_cast<size_t>(truth)][static_cast<size_t>(pred)]++;
    }
    void merge(const ConfusionMatrix &other);
    uint64_t total() const;
    uint64_t trace() const;
    uint64_t row_sum(int c) const;
    uint64_t col_sum(int c) const;
};

double overall_accuracy(const ConfusionMatrix &cm);

// One-vs-rest reductions. Empty denominators yield nullopt, never 0 or 1.
std::optional<double> sensitivity(const ConfusionMatrix &cm, wfdb::BeatClass c);
std::optional<double> specificity(const ConfusionMatrix &cm, wfdb::BeatClass c);

struct ClassMetrics {
    uint64_t support = 0;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

struct EvalReport {
    double overall_accuracy = 0.0;
    uint64_t n_total = 0;
    std::array<ClassMetrics, 5> per_class;
    std::optional<double> macro_sensitivity; // unweighted mean over defined classes
    std::optional<double> macro_specificity;
    ConfusionMatrix confusion;
};

EvalReport report(const ConfusionMatrix &cm);

// Deterministic JSON with a fixed key order; real metrics carry exactly six
// decimal places, undefined metrics serialize as null.
std::string render_json(const EvalReport &report);
EvalReport parse_report(const std::string &json_text);

} // namespace ecg::metrics
