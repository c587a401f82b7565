#include "ecgbeatnet/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"
#include "ecgbeatnet/rng.hpp"

namespace ecg::dataset {

namespace {

constexpr uint16_t kCacheVersion = 1;
constexpr char kCacheMagic[4] = {'E', 'B', 'W', '1'};

// Sliding median over a fixed odd window. Keeps the window contents in a
// sorted vector; for the window sizes in play (tens to a few hundred) the
// memmove-based insert/erase beats tree containers.
std::vector<double> median_filter(std::span<const double> x, int window) {
    const int n = static_cast<int>(x.size());
    const int half = window / 2;

    // Edge replication realized by filtering a padded copy.
    std::vector<double> padded;
    padded.reserve(static_cast<size_t>(n + 2 * half));
    padded.insert(padded.end(), static_cast<size_t>(half), x.front());
    padded.insert(padded.end(), x.begin(), x.end());
    padded.insert(padded.end(), static_cast<size_t>(half), x.back());

    std::vector<double> sorted(padded.begin(), padded.begin() + window);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> out(static_cast<size_t>(n));
    out[0] = sorted[static_cast<size_t>(half)];
    for (int t = 1; t < n; ++t) {
        const double leaving = padded[static_cast<size_t>(t - 1)];
        const double entering = padded[static_cast<size_t>(t - 1 + window)];
        sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), leaving));
        sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), entering), entering);
        out[static_cast<size_t>(t)] = sorted[static_cast<size_t>(half)];
    }
    return out;
}

} // namespace

void PreprocessConfig::validate() const {
    if (window_len <= 0 || window_len % 2 != 0) {
        throw ConfigError("window_len must be a positive even number, got " +
                          std::to_string(window_len));
    }
    if (leads.empty()) {
        throw ConfigError("at least one lead index is required");
    }
    std::vector<int> unique_leads = leads;
    std::sort(unique_leads.begin(), unique_leads.end());
    if (std::adjacent_find(unique_leads.begin(), unique_leads.end()) != unique_leads.end()) {
        throw ConfigError("lead indices must be unique");
    }
    if (unique_leads.front() < 0) {
        throw ConfigError("lead indices must be non-negative");
    }
    if (!(median_win_1 > 0) || !(median_win_1 < median_win_2)) {
        throw ConfigError("median windows must satisfy 0 < median_win_1 < median_win_2");
    }
    if (!(epsilon_std > 0)) {
        throw ConfigError("epsilon_std must be positive");
    }
}

int median_window_samples(double seconds, double fs) {
    long long w = std::llround(seconds * fs);
    if (w % 2 == 0) ++w;
    if (w < 1) w = 1;
    return static_cast<int>(w);
}

std::vector<double> remove_baseline(std::span<const double> signal, double fs, double w1,
                                    double w2) {
    if (signal.empty()) {
        throw Error("remove_baseline needs a non-empty signal");
    }
    const int k1 = median_window_samples(w1, fs);
    const int k2 = median_window_samples(w2, fs);
    const std::vector<double> stage1 = median_filter(signal, k1);
    const std::vector<double> baseline = median_filter(stage1, k2);
    std::vector<double> out(signal.size());
    for (size_t t = 0; t < signal.size(); ++t) out[t] = signal[t] - baseline[t];
    return out;
}

void normalize_window(std::span<double> mat, int n_leads, int window_len, double epsilon_std) {
    for (int lead = 0; lead < n_leads; ++lead) {
        double *channel = mat.data() + static_cast<size_t>(lead) * window_len;
        double mean = 0.0;
        for (int t = 0; t < window_len; ++t) mean += channel[t];
        mean /= window_len;
        double var = 0.0;
        for (int t = 0; t < window_len; ++t) {
            const double d = channel[t] - mean;
            var += d * d;
        }
        const double std_dev = std::sqrt(var / window_len);
        const double denom = std::max(std_dev, epsilon_std);
        for (int t = 0; t < window_len; ++t) channel[t] = (channel[t] - mean) / denom;
    }
}

RecordBeats prepare_record(const wfdb::Record &record, const PreprocessConfig &config) {
    RecordBeats beats;
    beats.record_id = record.header.record_name;
    beats.annotations = record.annotations;
    beats.physical = wfdb::to_physical(record.signals, record.header);
    if (config.baseline_filter) {
        for (auto &lead : beats.physical) {
            lead = remove_baseline(lead, record.header.sampling_frequency, config.median_win_1,
                                   config.median_win_2);
        }
    }
    return beats;
}

std::vector<BeatWindow> segment_beats(std::span<const RecordBeats> records,
                                      const PreprocessConfig &config) {
    config.validate();
    const int n_leads = static_cast<int>(config.leads.size());
    const int window_len = config.window_len;
    const int64_t half = window_len / 2;

    std::vector<BeatWindow> windows;
    std::vector<double> scratch(static_cast<size_t>(n_leads) * window_len);

    for (const RecordBeats &record : records) {
        for (int lead : config.leads) {
            if (lead >= static_cast<int>(record.physical.size())) {
                throw MissingLead("record " + record.record_id + " has no lead " +
                                  std::to_string(lead));
            }
        }
        const int64_t n_samples =
            static_cast<int64_t>(record.physical[static_cast<size_t>(config.leads[0])].size());

        for (const wfdb::AnnotationEvent &event : record.annotations) {
            const auto label = wfdb::map_beat_class(event.code);
            if (!label) continue;
            const int64_t lo = event.sample_index - half;
            const int64_t hi = lo + window_len;
            if (lo < 0 || hi > n_samples) continue; // window crosses record boundary

            for (int l = 0; l < n_leads; ++l) {
                const auto &src = record.physical[static_cast<size_t>(config.leads[l])];
                std::copy(src.begin() + lo, src.begin() + hi,
                          scratch.begin() + static_cast<size_t>(l) * window_len);
            }
            normalize_window(scratch, n_leads, window_len, config.epsilon_std);

            BeatWindow window;
            window.record_id = record.record_id;
            window.r_sample = event.sample_index;
            window.label = *label;
            window.channels.assign(scratch.begin(), scratch.end());
            windows.push_back(std::move(window));
        }
    }
    return windows;
}

DatasetSplit stratified_split(std::span<const wfdb::BeatClass> labels,
                              std::array<double, 3> fractions, uint64_t seed) {
    for (double f : fractions) {
        if (!(f > 0)) throw ConfigError("split fractions must be positive");
    }
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
    }

    DatasetSplit split;
    split.seed = seed;
    for (int c = 0; c < wfdb::kNumClasses; ++c) {
        std::vector<uint32_t> indices;
        for (size_t i = 0; i < labels.size(); ++i) {
            if (static_cast<int>(labels[i]) == c) indices.push_back(static_cast<uint32_t>(i));
        }
        rng::Generator gen(seed, static_cast<uint64_t>(c));
        gen.shuffle(indices);

        const auto n = static_cast<long long>(indices.size());
        const auto cut1 = static_cast<size_t>(std::llround(n * fractions[0]));
        const auto cut2 = static_cast<size_t>(std::llround(n * (fractions[0] + fractions[1])));
        split.train.insert(split.train.end(), indices.begin(), indices.begin() + cut1);
        split.val.insert(split.val.end(), indices.begin() + cut1, indices.begin() + cut2);
        split.test.insert(split.test.end(), indices.begin() + cut2, indices.end());
    }
    return split;
}

std::array<double, 5> class_weights(std::span<const wfdb::BeatClass> labels) {
    std::array<int64_t, 5> counts{};
    for (wfdb::BeatClass label : labels) counts[static_cast<size_t>(label)]++;
    std::array<double, 5> weights{};
    const double total = static_cast<double>(labels.size());
    for (int c = 0; c < wfdb::kNumClasses; ++c) {
        if (counts[static_cast<size_t>(c)] == 0) {
            throw EmptyClass(std::string("class ") +
                             wfdb::beat_class_name(static_cast<wfdb::BeatClass>(c)) +
                             " has no examples");
        }
        weights[static_cast<size_t>(c)] =
            total / (wfdb::kNumClasses * static_cast<double>(counts[static_cast<size_t>(c)]));
    }
    return weights;
}

std::vector<uint8_t> encode_cache(const BeatCache &cache) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kCacheMagic, kCacheMagic + 4);
    io::put_u16(out, kCacheVersion);
    io::put_u32(out, static_cast<uint32_t>(cache.windows.size()));
    io::put_u16(out, static_cast<uint16_t>(cache.n_leads));
    io::put_u16(out, static_cast<uint16_t>(cache.window_len));
    const size_t samples_per_window =
        static_cast<size_t>(cache.n_leads) * static_cast<size_t>(cache.window_len);
    for (const BeatWindow &window : cache.windows) {
        if (window.channels.size() != samples_per_window) {
            throw ShapeMismatch("window from record " + window.record_id + " holds " +
                                std::to_string(window.channels.size()) + " samples, expected " +
                                std::to_string(samples_per_window));
        }
        if (window.record_id.size() > 255) {
            throw Error("record id too long for cache: " + window.record_id);
        }
        out.push_back(static_cast<uint8_t>(window.record_id.size()));
        out.insert(out.end(), window.record_id.begin(), window.record_id.end());
        io::put_i64(out, window.r_sample);
        out.push_back(static_cast<uint8_t>(window.label));
        for (float v : window.channels) io::put_f32(out, v);
    }
    return out;
}

BeatCache decode_cache(std::span<const uint8_t> bytes) {
    io::ByteReader reader(bytes, "beat cache");
    if (reader.get_string(4) != std::string(kCacheMagic, 4)) {
        throw BadMagic("beat cache: magic is not EBW1");
    }
    const uint16_t version = reader.get_u16();
    if (version != kCacheVersion) {
        throw VersionMismatch("beat cache: version " + std::to_string(version) +
                              ", expected " + std::to_string(kCacheVersion));
    }
    BeatCache cache;
    const uint32_t n_windows = reader.get_u32();
    cache.n_leads = reader.get_u16();
    cache.window_len = reader.get_u16();
    const size_t samples_per_window =
        static_cast<size_t>(cache.n_leads) * static_cast<size_t>(cache.window_len);
    cache.windows.reserve(n_windows);
    for (uint32_t i = 0; i < n_windows; ++i) {
        BeatWindow window;
        window.record_id = reader.get_string(reader.get_u8());
        window.r_sample = reader.get_i64();
        const uint8_t label = reader.get_u8();
        if (label >= wfdb::kNumClasses) {
            throw CorruptPayload("beat cache: label byte " + std::to_string(label) +
                                 " out of range");
        }
        window.label = static_cast<wfdb::BeatClass>(label);
        window.channels.resize(samples_per_window);
        for (float &v : window.channels) v = reader.get_f32();
        cache.windows.push_back(std::move(window));
    }
    reader.expect_end();
    return cache;
}

void write_cache(const std::filesystem::path &path, const BeatCache &cache) {
    io::atomic_write(path, encode_cache(cache));
}

BeatCache read_cache(const std::filesystem::path &path) {
    const auto bytes = io::read_file_bytes(path);
    return decode_cache(bytes);
}

} // namespace ecg::dataset
