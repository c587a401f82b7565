#include "ecgbeatnet/metrics.hpp"

#include <cinttypes>
#include <cstdio>

#include <json.hpp>

#include "ecgbeatnet/errors.hpp"

namespace ecg::metrics {

void ConfusionMatrix::merge(const ConfusionMatrix &other) {
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) counts[r][c] += other.counts[r][c];
    }
}

uint64_t ConfusionMatrix::total() const {
    uint64_t n = 0;
    for (const auto &row : counts) {
        for (uint64_t v : row) n += v;
    }
    return n;
}

uint64_t ConfusionMatrix::trace() const {
    uint64_t n = 0;
    for (int c = 0; c < 5; ++c) n += counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
    return n;
}

uint64_t ConfusionMatrix::row_sum(int c) const {
    uint64_t n = 0;
    for (uint64_t v : counts[static_cast<size_t>(c)]) n += v;
    return n;
}

uint64_t ConfusionMatrix::col_sum(int c) const {
    uint64_t n = 0;
    for (int r = 0; r < 5; ++r) n += counts[static_cast<size_t>(r)][static_cast<size_t>(c)];
    return n;
}

double overall_accuracy(const ConfusionMatrix &cm) {
    const uint64_t total = cm.total();
    if (total == 0) throw EmptyMatrix("confusion matrix holds no observations");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::optional<double> sensitivity(const ConfusionMatrix &cm, wfdb::BeatClass c) {
    const int ci = static_cast<int>(c);
    const uint64_t tp = cm.counts[static_cast<size_t>(ci)][static_cast<size_t>(ci)];
    const uint64_t positives = cm.row_sum(ci); // TP + FN
    if (positives == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(positives);
}

std::optional<double> specificity(const ConfusionMatrix &cm, wfdb::BeatClass c) {
    const int ci = static_cast<int>(c);
    const uint64_t tp = cm.counts[static_cast<size_t>(ci)][static_cast<size_t>(ci)];
    const uint64_t fp = cm.col_sum(ci) - tp;
    const uint64_t negatives = cm.total() - cm.row_sum(ci); // TN + FP
    if (negatives == 0) return std::nullopt;
    const uint64_t tn = negatives - fp;
    return static_cast<double>(tn) / static_cast<double>(negatives);
}

EvalReport report(const ConfusionMatrix &cm) {
    if (cm.total() == 0) throw EmptyMatrix("confusion matrix holds no observations");
    EvalReport rep;
    rep.confusion = cm;
    rep.n_total = cm.total();
    rep.overall_accuracy = overall_accuracy(cm);

    double sens_sum = 0.0, spec_sum = 0.0;
    int sens_defined = 0, spec_defined = 0;
    for (int c = 0; c < 5; ++c) {
        ClassMetrics &m = rep.per_class[static_cast<size_t>(c)];
        m.support = cm.row_sum(c);
        m.sensitivity = sensitivity(cm, static_cast<wfdb::BeatClass>(c));
        m.specificity = specificity(cm, static_cast<wfdb::BeatClass>(c));
        if (m.sensitivity) {
            sens_sum += *m.sensitivity;
            ++sens_defined;
        }
        if (m.specificity) {
            spec_sum += *m.specificity;
            ++spec_defined;
        }
    }
    if (sens_defined > 0) rep.macro_sensitivity = sens_sum / sens_defined;
    if (spec_defined > 0) rep.macro_specificity = spec_sum / spec_defined;
    return rep;
}

namespace {

void append_metric(std::string &out, std::optional<double> value) {
    if (!value) {
        out += "null";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *value);
    out += buf;
}

} // namespace

std::string render_json(const EvalReport &rep) {
    std::string out;
    out += "{\n";
    out += "  \"overall_accuracy\": ";
    append_metric(out, rep.overall_accuracy);
    out += ",\n  \"n_total\": " + std::to_string(rep.n_total);
    out += ",\n  \"classes\": [\n";
    for (int c = 0; c < 5; ++c) {
        const ClassMetrics &m = rep.per_class[static_cast<size_t>(c)];
        out += std::string("    {\"class\": \"") +
               wfdb::beat_class_name(static_cast<wfdb::BeatClass>(c)) + "\"";
        out += ", \"support\": " + std::to_string(m.support);
        out += ", \"sensitivity\": ";
        append_metric(out, m.sensitivity);
        out += ", \"specificity\": ";
        append_metric(out, m.specificity);
        out += c < 4 ? "},\n" : "}\n";
    }
    out += "  ],\n";
    out += "  \"macro_sensitivity\": ";
    append_metric(out, rep.macro_sensitivity);
    out += ",\n  \"macro_specificity\": ";
    append_metric(out, rep.macro_specificity);
    out += ",\n  \"confusion\": [\n";
    for (int r = 0; r < 5; ++r) {
        out += "    [";
        for (int c = 0; c < 5; ++c) {
            out += std::to_string(rep.confusion.counts[static_cast<size_t>(r)][static_cast<size_t>(c)]);
            if (c < 4) out += ", ";
        }
        out += r < 4 ? "],\n" : "]\n";
    }
    out += "  ]\n}\n";
    return out;
}

EvalReport parse_report(const std::string &json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception &e) {
        throw CorruptPayload(std::string("evaluation report is not valid JSON: ") + e.what());
    }
    EvalReport rep;
    rep.overall_accuracy = doc.at("overall_accuracy").get<double>();
    rep.n_total = doc.at("n_total").get<uint64_t>();
    const auto &classes = doc.at("classes");
    for (int c = 0; c < 5; ++c) {
        const auto &entry = classes.at(static_cast<size_t>(c));
        ClassMetrics &m = rep.per_class[static_cast<size_t>(c)];
        m.support = entry.at("support").get<uint64_t>();
        if (!entry.at("sensitivity").is_null()) {
            m.sensitivity = entry.at("sensitivity").get<double>();
        }
        if (!entry.at("specificity").is_null()) {
            m.specificity = entry.at("specificity").get<double>();
        }
    }
    if (!doc.at("macro_sensitivity").is_null()) {
        rep.macro_sensitivity = doc.at("macro_sensitivity").get<double>();
    }
    if (!doc.at("macro_specificity").is_null()) {
        rep.macro_specificity = doc.at("macro_specificity").get<double>();
    }
    const auto &confusion = doc.at("confusion");
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) {
            rep.confusion.counts[static_cast<size_t>(r)][static_cast<size_t>(c)] =
                confusion.at(static_cast<size_t>(r)).at(static_cast<size_t>(c)).get<uint64_t>();
        }
    }
    return rep;
}

} // namespace ecg::metrics
