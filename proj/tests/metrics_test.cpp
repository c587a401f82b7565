#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/metrics.hpp"
#include "ecgbeatnet/rng.hpp"

using namespace ecg;
using metrics::ConfusionMatrix;
using wfdb::BeatClass;

namespace {

ConfusionMatrix random_matrix(rng::Generator &gen, uint64_t max_count = 50) {
    ConfusionMatrix cm;
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) cm.counts[r][c] = gen.next_below(max_count);
    }
    return cm;
}

// One-vs-rest oracle: relabel every (truth, pred) pair to binary and count.
struct BinaryCounts {
    uint64_t tp = 0, fn = 0, fp = 0, tn = 0;
};

BinaryCounts binary_reduce(const ConfusionMatrix &cm, int positive) {
    BinaryCounts counts;
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) {
            const uint64_t n = cm.counts[r][c];
            const bool truth_pos = r == positive;
            const bool pred_pos = c == positive;
            if (truth_pos && pred_pos) counts.tp += n;
            if (truth_pos && !pred_pos) counts.fn += n;
            if (!truth_pos && pred_pos) counts.fp += n;
            if (!truth_pos && !pred_pos) counts.tn += n;
        }
    }
    return counts;
}

} // namespace

TEST_CASE("accumulate") {
    ConfusionMatrix cm;
    cm.accumulate(BeatClass::Normal, BeatClass::Normal);
    CHECK(cm.counts[0][0] == 1);
    CHECK(cm.total() == 1);

    for (int i = 0; i < 99; ++i) cm.accumulate(BeatClass::Normal, BeatClass::Normal);
    CHECK(cm.trace() == 100);

    SUBCASE("accumulation order does not matter") {
        std::vector<std::pair<BeatClass, BeatClass>> pairs;
        rng::Generator gen(1, 1);
        for (int i = 0; i < 200; ++i) {
            pairs.emplace_back(static_cast<BeatClass>(gen.next_below(5)),
                               static_cast<BeatClass>(gen.next_below(5)));
        }
        ConfusionMatrix forward, backward;
        for (const auto &[t, p] : pairs) forward.accumulate(t, p);
        std::reverse(pairs.begin(), pairs.end());
        for (const auto &[t, p] : pairs) backward.accumulate(t, p);
        CHECK(forward.counts == backward.counts);
    }
}

TEST_CASE("overall accuracy") {
    ConfusionMatrix cm;
    for (int c = 0; c < 5; ++c) cm.counts[c][c] = 10;
    CHECK(metrics::overall_accuracy(cm) == doctest::Approx(1.0));

    cm = ConfusionMatrix{};
    cm.counts[0][0] = 89;
    cm.counts[0][1] = 11;
    CHECK(metrics::overall_accuracy(cm) == doctest::Approx(0.89));

    SUBCASE("empty matrix throws") {
        CHECK_THROWS_AS(metrics::overall_accuracy(ConfusionMatrix{}), EmptyMatrix);
        CHECK_THROWS_AS(metrics::report(ConfusionMatrix{}), EmptyMatrix);
    }
    SUBCASE("matches a direct recount") {
        rng::Generator gen(2, 2);
        for (int trial = 0; trial < 100; ++trial) {
            const auto cm2 = random_matrix(gen);
            if (cm2.total() == 0) continue;
            uint64_t correct = 0, total = 0;
            for (int r = 0; r < 5; ++r) {
                for (int c = 0; c < 5; ++c) {
                    total += cm2.counts[r][c];
                    if (r == c) correct += cm2.counts[r][c];
                }
            }
            CHECK(metrics::overall_accuracy(cm2) ==
                  static_cast<double>(correct) / static_cast<double>(total));
        }
    }
}

TEST_CASE("sensitivity and specificity") {
    SUBCASE("perfect diagonal gives 1.0 everywhere") {
        ConfusionMatrix cm;
        for (int c = 0; c < 5; ++c) cm.counts[c][c] = 7;
        for (int c = 0; c < 5; ++c) {
            CHECK(*metrics::sensitivity(cm, static_cast<BeatClass>(c)) == doctest::Approx(1.0));
            CHECK(*metrics::specificity(cm, static_cast<BeatClass>(c)) == doctest::Approx(1.0));
        }
    }
    SUBCASE("worked example: class 0 row (8,2,0,0,0)") {
        ConfusionMatrix cm;
        cm.counts[0] = {8, 2, 0, 0, 0};
        for (int c = 1; c < 5; ++c) cm.counts[c][c] = 10;
        CHECK(*metrics::sensitivity(cm, BeatClass::Normal) == doctest::Approx(0.8));
        // class 1 sees 2 false positives out of 40 true negatives+fp
        CHECK(*metrics::specificity(cm, BeatClass::LBBB) == doctest::Approx(38.0 / 40.0));
    }
    SUBCASE("empty denominators are absent, never 0 or 1") {
        ConfusionMatrix cm;
        cm.counts[1][1] = 5;
        CHECK_FALSE(metrics::sensitivity(cm, BeatClass::Normal).has_value());
        // all mass in row 1: specificity of class 1 has no negatives
        CHECK_FALSE(metrics::specificity(cm, BeatClass::LBBB).has_value());
        CHECK(metrics::sensitivity(cm, BeatClass::LBBB).has_value());
    }
    SUBCASE("matches the binary-reduction oracle exactly") {
        rng::Generator gen(3, 3);
        for (int trial = 0; trial < 1000; ++trial) {
            const auto cm = random_matrix(gen);
            for (int c = 0; c < 5; ++c) {
                const auto counts = binary_reduce(cm, c);
                const auto sens = metrics::sensitivity(cm, static_cast<BeatClass>(c));
                const auto spec = metrics::specificity(cm, static_cast<BeatClass>(c));
                if (counts.tp + counts.fn == 0) {
                    CHECK_FALSE(sens.has_value());
                } else {
                    CHECK(*sens == static_cast<double>(counts.tp) /
                                       static_cast<double>(counts.tp + counts.fn));
                }
                if (counts.tn + counts.fp == 0) {
                    CHECK_FALSE(spec.has_value());
                } else {
                    CHECK(*spec == static_cast<double>(counts.tn) /
                                       static_cast<double>(counts.tn + counts.fp));
                }
                if (sens) {
                    CHECK(*sens >= 0.0);
                    CHECK(*sens <= 1.0);
                }
                if (spec) {
                    CHECK(*spec >= 0.0);
                    CHECK(*spec <= 1.0);
                }
            }
        }
    }
    SUBCASE("per-class TP and row sums tie back to the totals") {
        rng::Generator gen(4, 4);
        const auto cm = random_matrix(gen);
        uint64_t tp_sum = 0, row_sum = 0;
        for (int c = 0; c < 5; ++c) {
            tp_sum += cm.counts[c][c];
            row_sum += cm.row_sum(c);
        }
        CHECK(tp_sum == cm.trace());
        CHECK(row_sum == cm.total());
    }
    SUBCASE("metrics are invariant under a simultaneous class relabeling") {
        rng::Generator gen(5, 5);
        const auto cm = random_matrix(gen);
        const std::array<int, 5> perm = {3, 0, 4, 1, 2};
        ConfusionMatrix relabeled;
        for (int r = 0; r < 5; ++r) {
            for (int c = 0; c < 5; ++c) {
                relabeled.counts[perm[r]][perm[c]] = cm.counts[r][c];
            }
        }
        CHECK(metrics::overall_accuracy(cm) == metrics::overall_accuracy(relabeled));
        for (int c = 0; c < 5; ++c) {
            CHECK(metrics::sensitivity(cm, static_cast<BeatClass>(c)) ==
                  metrics::sensitivity(relabeled, static_cast<BeatClass>(perm[c])));
            CHECK(metrics::specificity(cm, static_cast<BeatClass>(c)) ==
                  metrics::specificity(relabeled, static_cast<BeatClass>(perm[c])));
        }
    }
}

TEST_CASE("report assembly and JSON round trip") {
    SUBCASE("diagonal matrix reports all ones") {
        ConfusionMatrix cm;
        for (int c = 0; c < 5; ++c) cm.counts[c][c] = 4;
        const auto rep = metrics::report(cm);
        CHECK(rep.overall_accuracy == doctest::Approx(1.0));
        CHECK(rep.n_total == 20);
        CHECK(*rep.macro_sensitivity == doctest::Approx(1.0));
        CHECK(*rep.macro_specificity == doctest::Approx(1.0));
        for (const auto &m : rep.per_class) {
            CHECK(m.support == 4);
            CHECK(*m.sensitivity == doctest::Approx(1.0));
        }
    }
    SUBCASE("support values sum to the total") {
        rng::Generator gen(6, 6);
        const auto cm = random_matrix(gen);
        const auto rep = metrics::report(cm);
        uint64_t support = 0;
        for (const auto &m : rep.per_class) support += m.support;
        CHECK(support == rep.n_total);
    }
    SUBCASE("render -> parse -> identical fields; rendering is byte-stable") {
        rng::Generator gen(7, 7);
        const auto cm = random_matrix(gen);
        const auto rep = metrics::report(cm);
        const std::string text = metrics::render_json(rep);
        CHECK(metrics::render_json(rep) == text);

        const auto parsed = metrics::parse_report(text);
        CHECK(parsed.n_total == rep.n_total);
        CHECK(parsed.overall_accuracy == doctest::Approx(rep.overall_accuracy).epsilon(1e-6));
        for (int c = 0; c < 5; ++c) {
            CHECK(parsed.per_class[c].support == rep.per_class[c].support);
            if (rep.per_class[c].sensitivity) {
                CHECK(*parsed.per_class[c].sensitivity ==
                      doctest::Approx(*rep.per_class[c].sensitivity).epsilon(1e-6));
            } else {
                CHECK_FALSE(parsed.per_class[c].sensitivity.has_value());
            }
        }
        CHECK(parsed.confusion.counts == rep.confusion.counts);
    }
    SUBCASE("undefined metrics serialize as null and macros skip them") {
        ConfusionMatrix cm;
        cm.counts[0][0] = 10; // classes 1..4 have empty rows
        const auto rep = metrics::report(cm);
        CHECK_FALSE(rep.per_class[1].sensitivity.has_value());
        CHECK(*rep.macro_sensitivity == doctest::Approx(1.0)); // only class 0 defined
        const std::string text = metrics::render_json(rep);
        CHECK(text.find("\"sensitivity\": null") != std::string::npos);
        const auto parsed = metrics::parse_report(text);
        CHECK_FALSE(parsed.per_class[1].sensitivity.has_value());
    }
    SUBCASE("metrics carry six decimal places") {
        ConfusionMatrix cm;
        cm.counts[0][0] = 1;
        cm.counts[0][1] = 2;
        cm.counts[1][1] = 3;
        const std::string text = metrics::render_json(metrics::report(cm));
        CHECK(text.find("\"overall_accuracy\": 0.666667") != std::string::npos);
    }
    SUBCASE("malformed report text is rejected") {
        CHECK_THROWS_AS(metrics::parse_report("not json"), CorruptPayload);
    }
}
