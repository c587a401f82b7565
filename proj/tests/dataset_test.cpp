#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ecgbeatnet/dataset.hpp"
#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"
#include "ecgbeatnet/rng.hpp"
#include "support/synthetic.hpp"

using namespace ecg;
using wfdb::BeatClass;

namespace {

// Brute-force single-stage median with edge replication.
std::vector<double> median_oracle(const std::vector<double> &x, int window) {
    const int n = static_cast<int>(x.size());
    const int half = window / 2;
    std::vector<double> out(x.size());
    std::vector<double> buffer(static_cast<size_t>(window));
    for (int t = 0; t < n; ++t) {
        for (int k = 0; k < window; ++k) {
            const int idx = std::clamp(t - half + k, 0, n - 1);
            buffer[static_cast<size_t>(k)] = x[static_cast<size_t>(idx)];
        }
        std::nth_element(buffer.begin(), buffer.begin() + half, buffer.end());
        out[static_cast<size_t>(t)] = buffer[static_cast<size_t>(half)];
    }
    return out;
}

std::vector<double> remove_baseline_oracle(const std::vector<double> &x, double fs, double w1,
                                           double w2) {
    const auto stage1 = median_oracle(x, dataset::median_window_samples(w1, fs));
    const auto stage2 = median_oracle(stage1, dataset::median_window_samples(w2, fs));
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - stage2[i];
    return out;
}

} // namespace

TEST_CASE("median window sizes round to odd sample counts") {
    CHECK(dataset::median_window_samples(0.2, 360) == 73);
    CHECK(dataset::median_window_samples(0.6, 360) == 217);
    CHECK(dataset::median_window_samples(0.2, 250) == 51);
    CHECK(dataset::median_window_samples(0.001, 250) == 1);
}

TEST_CASE("remove_baseline") {
    SUBCASE("a constant signal becomes all zeros") {
        const std::vector<double> constant(300, 2.5);
        const auto out = dataset::remove_baseline(constant, 360, 0.2, 0.6);
        for (double v : out) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("an additive offset does not change the output") {
        rng::Generator gen(5, 1);
        std::vector<double> x(400);
        for (double &v : x) v = gen.next_double(-1.0, 1.0);
        std::vector<double> shifted = x;
        for (double &v : shifted) v += 3.75;
        const auto a = dataset::remove_baseline(x, 360, 0.2, 0.6);
        const auto b = dataset::remove_baseline(shifted, 360, 0.2, 0.6);
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    SUBCASE("matches the brute-force two-stage oracle on a ramp") {
        std::vector<double> ramp(1000);
        std::iota(ramp.begin(), ramp.end(), 0.0);
        const auto fast = dataset::remove_baseline(ramp, 360, 0.2, 0.6);
        const auto slow = remove_baseline_oracle(ramp, 360, 0.2, 0.6);
        REQUIRE(fast.size() == slow.size());
        for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
    }
    SUBCASE("matches the oracle on random signals") {
        rng::Generator gen(9, 4);
        std::vector<double> x(500);
        for (double &v : x) v = gen.next_double(-2.0, 2.0);
        const auto fast = dataset::remove_baseline(x, 250, 0.2, 0.6);
        const auto slow = remove_baseline_oracle(x, 250, 0.2, 0.6);
        for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
    }
    SUBCASE("output length equals input length") {
        const std::vector<double> x(123, 1.0);
        CHECK(dataset::remove_baseline(x, 360, 0.2, 0.6).size() == x.size());
    }
}

TEST_CASE("normalize_window") {
    SUBCASE("flat channel guard yields zeros") {
        std::vector<double> mat = {1, 1, 1, 1};
        dataset::normalize_window(mat, 1, 4, 1e-6);
        for (double v : mat) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("two-point channel") {
        std::vector<double> mat = {0, 2};
        dataset::normalize_window(mat, 1, 2, 1e-6);
        CHECK(mat[0] == doctest::Approx(-1.0));
        CHECK(mat[1] == doctest::Approx(1.0));
    }
    SUBCASE("random channel reaches zero mean, unit population std") {
        rng::Generator gen(3, 9);
        std::vector<double> mat(256);
        for (double &v : mat) v = gen.next_double(-5.0, 5.0);
        dataset::normalize_window(mat, 1, 256, 1e-6);
        double mean = 0;
        for (double v : mat) mean += v;
        mean /= 256;
        double var = 0;
        for (double v : mat) var += (v - mean) * (v - mean);
        const double stddev = std::sqrt(var / 256);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(stddev - 1.0) < 1e-6);
    }
    SUBCASE("channels normalize independently") {
        std::vector<double> mat = {0, 2, 5, 5};
        dataset::normalize_window(mat, 2, 2, 1e-6);
        CHECK(mat[0] == doctest::Approx(-1.0));
        CHECK(mat[1] == doctest::Approx(1.0));
        CHECK(mat[2] == doctest::Approx(0.0));
        CHECK(mat[3] == doctest::Approx(0.0));
    }
}

namespace {

dataset::RecordBeats make_ramp_record(int64_t n_samples, std::vector<wfdb::AnnotationEvent> events) {
    dataset::RecordBeats record;
    record.record_id = "ramp";
    record.physical.resize(2);
    for (int lead = 0; lead < 2; ++lead) {
        auto &x = record.physical[static_cast<size_t>(lead)];
        x.resize(static_cast<size_t>(n_samples));
        for (int64_t t = 0; t < n_samples; ++t) {
            // distinct non-flat content per lead
            x[static_cast<size_t>(t)] = std::sin(0.01 * static_cast<double>(t) + lead) +
                                        1e-4 * static_cast<double>(t);
        }
    }
    record.annotations = std::move(events);
    return record;
}

wfdb::AnnotationEvent beat_at(int64_t sample, int code) {
    wfdb::AnnotationEvent event;
    event.sample_index = sample;
    event.code = code;
    return event;
}

} // namespace

TEST_CASE("segment_beats window placement and boundary rules") {
    dataset::PreprocessConfig config;
    config.window_len = 256;
    config.leads = {0, 1};

    const int64_t n = 650000;
    auto record = make_ramp_record(
        n, {beat_at(100, 1), beat_at(127, 1), beat_at(128, 2), beat_at(100000, 1),
            beat_at(n - 128, 5), beat_at(n - 127, 5), beat_at(200000, 28)});
    const auto windows = dataset::segment_beats(std::span(&record, 1), config);

    // kept: 128, 100000, n-128; dropped: 100, 127, n-127; unmapped: 200000
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].r_sample == 128);
    CHECK(windows[1].r_sample == 100000);
    CHECK(windows[2].r_sample == n - 128);
    CHECK(windows[0].label == BeatClass::LBBB);
    CHECK(windows[2].label == BeatClass::PVC);

    // the beat at 100000 spans samples 99872..100127 inclusive
    std::vector<double> expected(2 * 256);
    for (int lead = 0; lead < 2; ++lead) {
        for (int t = 0; t < 256; ++t) {
            expected[static_cast<size_t>(lead) * 256 + t] =
                record.physical[static_cast<size_t>(lead)][static_cast<size_t>(99872 + t)];
        }
    }
    dataset::normalize_window(expected, 2, 256, config.epsilon_std);
    for (size_t i = 0; i < expected.size(); ++i) {
        CHECK(windows[1].channels[i] == doctest::Approx(expected[i]).epsilon(1e-6));
    }
}

TEST_CASE("segment_beats bookkeeping invariant") {
    dataset::PreprocessConfig config;
    auto spec = testsupport::make_default_spec("s1", 20000, 3, true);
    const auto dir = std::filesystem::temp_directory_path() / "ecg_dataset_test";
    std::filesystem::remove_all(dir);
    testsupport::write_synthetic_record(dir, spec);
    const auto record = wfdb::load_record(dir, "s1");
    const auto beats = dataset::prepare_record(record, config);
    const auto windows = dataset::segment_beats(std::span(&beats, 1), config);

    int64_t unmapped = 0, dropped = 0, mappable = 0;
    for (const auto &event : record.annotations) {
        const auto cls = wfdb::map_beat_class(event.code);
        if (!cls) {
            ++unmapped;
            continue;
        }
        ++mappable;
        const int64_t lo = event.sample_index - config.window_len / 2;
        if (lo < 0 || lo + config.window_len > record.signals.n_samples) ++dropped;
    }
    CHECK(static_cast<int64_t>(windows.size()) == mappable - dropped);
    CHECK(static_cast<int64_t>(windows.size()) + dropped + unmapped ==
          static_cast<int64_t>(record.annotations.size()));

    // emitted windows satisfy the normalization invariant (float32)
    for (const auto &window : windows) {
        for (int lead = 0; lead < 2; ++lead) {
            double mean = 0;
            for (int t = 0; t < config.window_len; ++t) {
                mean += window.channels[static_cast<size_t>(lead) * config.window_len + t];
            }
            mean /= config.window_len;
            double var = 0;
            for (int t = 0; t < config.window_len; ++t) {
                const double d =
                    window.channels[static_cast<size_t>(lead) * config.window_len + t] - mean;
                var += d * d;
            }
            CHECK(std::abs(mean) <= 1e-4);
            CHECK(std::abs(std::sqrt(var / config.window_len) - 1.0) <= 1e-3);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("segment_beats rejects missing leads") {
    dataset::PreprocessConfig config;
    config.leads = {0, 2};
    auto record = make_ramp_record(1000, {beat_at(500, 1)});
    CHECK_THROWS_AS(dataset::segment_beats(std::span(&record, 1), config), MissingLead);
}

TEST_CASE("segment_beats output order is record order then annotation order") {
    dataset::PreprocessConfig config;
    config.window_len = 64;
    auto first = make_ramp_record(1000, {beat_at(400, 1), beat_at(600, 2)});
    first.record_id = "a";
    auto second = make_ramp_record(1000, {beat_at(500, 3)});
    second.record_id = "b";
    std::vector<dataset::RecordBeats> records;
    records.push_back(std::move(first));
    records.push_back(std::move(second));
    const auto windows = dataset::segment_beats(records, config);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].record_id == "a");
    CHECK(windows[0].r_sample == 400);
    CHECK(windows[1].record_id == "a");
    CHECK(windows[1].r_sample == 600);
    CHECK(windows[2].record_id == "b");
}

TEST_CASE("stratified_split") {
    SUBCASE("single class, exact rounding") {
        const std::vector<BeatClass> labels(10, BeatClass::Normal);
        const auto split = dataset::stratified_split(labels, {0.8, 0.1, 0.1}, 7);
        CHECK(split.train.size() == 8);
        CHECK(split.val.size() == 1);
        CHECK(split.test.size() == 1);
        CHECK(split.seed == 7);
    }
    SUBCASE("deterministic for a fixed seed") {
        std::vector<BeatClass> labels;
        for (int i = 0; i < 500; ++i) labels.push_back(static_cast<BeatClass>(i % 5));
        const auto a = dataset::stratified_split(labels, {0.8, 0.1, 0.1}, 42);
        const auto b = dataset::stratified_split(labels, {0.8, 0.1, 0.1}, 42);
        CHECK(a.train == b.train);
        CHECK(a.val == b.val);
        CHECK(a.test == b.test);
        const auto c = dataset::stratified_split(labels, {0.8, 0.1, 0.1}, 43);
        CHECK(a.train != c.train);
    }
    SUBCASE("per-class cuts follow the round() rule") {
        // class counts (100, 50, 50, 25, 25)
        std::vector<BeatClass> labels;
        const int counts[5] = {100, 50, 50, 25, 25};
        for (int c = 0; c < 5; ++c) {
            for (int i = 0; i < counts[c]; ++i) labels.push_back(static_cast<BeatClass>(c));
        }
        const std::array<double, 3> fractions = {0.8, 0.1, 0.1};
        const auto split = dataset::stratified_split(labels, fractions, 11);

        // oracle: evaluate the stated cuts directly per class
        std::array<int64_t, 5> want_train{}, want_val{}, want_test{};
        for (int c = 0; c < 5; ++c) {
            const auto cut1 = std::llround(counts[c] * fractions[0]);
            const auto cut2 = std::llround(counts[c] * (fractions[0] + fractions[1]));
            want_train[static_cast<size_t>(c)] = cut1;
            want_val[static_cast<size_t>(c)] = cut2 - cut1;
            want_test[static_cast<size_t>(c)] = counts[c] - cut2;
        }
        std::array<int64_t, 5> got_train{}, got_val{}, got_test{};
        for (uint32_t i : split.train) got_train[static_cast<size_t>(labels[i])]++;
        for (uint32_t i : split.val) got_val[static_cast<size_t>(labels[i])]++;
        for (uint32_t i : split.test) got_test[static_cast<size_t>(labels[i])]++;
        CHECK(got_train == want_train);
        CHECK(got_val == want_val);
        CHECK(got_test == want_test);
    }
    SUBCASE("buckets partition the index range") {
        rng::Generator gen(1, 8);
        std::vector<BeatClass> labels;
        for (int i = 0; i < 977; ++i) {
            labels.push_back(static_cast<BeatClass>(gen.next_below(5)));
        }
        const auto split = dataset::stratified_split(labels, {0.7, 0.15, 0.15}, 99);
        std::vector<int> seen(labels.size(), 0);
        for (uint32_t i : split.train) seen[i]++;
        for (uint32_t i : split.val) seen[i]++;
        for (uint32_t i : split.test) seen[i]++;
        for (int count : seen) CHECK(count == 1);
    }
    SUBCASE("invalid fractions are rejected") {
        const std::vector<BeatClass> labels(10, BeatClass::Normal);
        CHECK_THROWS_AS(dataset::stratified_split(labels, {0.8, 0.1, 0.2}, 1), ConfigError);
        CHECK_THROWS_AS(dataset::stratified_split(labels, {1.0, 0.0, 0.0}, 1), ConfigError);
    }
}

TEST_CASE("class_weights") {
    SUBCASE("balanced counts give unit weights") {
        std::vector<BeatClass> labels;
        for (int c = 0; c < 5; ++c) {
            for (int i = 0; i < 20; ++i) labels.push_back(static_cast<BeatClass>(c));
        }
        for (double w : dataset::class_weights(labels)) CHECK(w == doctest::Approx(1.0));
    }
    SUBCASE("inverse-frequency weights") {
        std::vector<BeatClass> labels;
        for (int i = 0; i < 60; ++i) labels.push_back(BeatClass::Normal);
        for (int c = 1; c < 5; ++c) {
            for (int i = 0; i < 10; ++i) labels.push_back(static_cast<BeatClass>(c));
        }
        const auto weights = dataset::class_weights(labels);
        CHECK(weights[0] == doctest::Approx(100.0 / (5 * 60)));
        for (int c = 1; c < 5; ++c) CHECK(weights[static_cast<size_t>(c)] == doctest::Approx(2.0));
        // identity: sum_c w_c * n_c = N
        CHECK(weights[0] * 60 + 4 * (weights[1] * 10) == doctest::Approx(100.0));
    }
    SUBCASE("an absent class is an error") {
        const std::vector<BeatClass> labels(10, BeatClass::Normal);
        CHECK_THROWS_AS(dataset::class_weights(labels), EmptyClass);
    }
}

TEST_CASE("beat cache round trip") {
    const auto windows = testsupport::synthetic_windows(4, 64, 2, 77);
    dataset::BeatCache cache;
    cache.n_leads = 2;
    cache.window_len = 64;
    cache.windows = windows;

    const auto bytes = dataset::encode_cache(cache);
    CHECK(dataset::encode_cache(cache) == bytes); // byte determinism

    const auto decoded = dataset::decode_cache(bytes);
    CHECK(decoded.n_leads == 2);
    CHECK(decoded.window_len == 64);
    REQUIRE(decoded.windows.size() == windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        CHECK(decoded.windows[i].record_id == windows[i].record_id);
        CHECK(decoded.windows[i].r_sample == windows[i].r_sample);
        CHECK(decoded.windows[i].label == windows[i].label);
        CHECK(decoded.windows[i].channels == windows[i].channels); // bit-exact floats
    }

    SUBCASE("magic, version, and truncation are validated") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(dataset::decode_cache(bad), BadMagic);
        auto version = bytes;
        version[4] = 9;
        CHECK_THROWS_AS(dataset::decode_cache(version), VersionMismatch);
        const std::span<const uint8_t> cut(bytes.data(), bytes.size() - 7);
        CHECK_THROWS_AS(dataset::decode_cache(cut), CorruptPayload);
        auto trailing = bytes;
        trailing.push_back(0);
        CHECK_THROWS_AS(dataset::decode_cache(trailing), CorruptPayload);
    }

    SUBCASE("file round trip") {
        const auto dir = std::filesystem::temp_directory_path() / "ecg_cache_test";
        std::filesystem::create_directories(dir);
        const auto path = dir / "cache.ebw";
        dataset::write_cache(path, cache);
        const auto loaded = dataset::read_cache(path);
        CHECK(loaded.windows.size() == cache.windows.size());
        CHECK(loaded.windows[0].channels == cache.windows[0].channels);
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("preprocess config validation") {
    dataset::PreprocessConfig config;
    config.window_len = 255;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.window_len = 256;
    config.leads = {};
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.leads = {0, 0};
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.leads = {0, 1};
    config.median_win_1 = 0.7;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.median_win_1 = 0.2;
    CHECK_NOTHROW(config.validate());
}
