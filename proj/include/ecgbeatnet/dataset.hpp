#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ecgbeatnet/wfdb.hpp"

namespace ecg::dataset {

struct PreprocessConfig {
    int window_len = 256;          // samples per beat window, centered on the R-peak
    std::vector<int> leads = {0, 1};
    bool baseline_filter = true;
    double median_win_1 = 0.2;     // seconds
    double median_win_2 = 0.6;     // seconds
    double epsilon_std = 1e-6;

    void validate() const; // throws ConfigError
};

// One normalized beat snippet. channels is row-major [lead][t].
struct BeatWindow {
    std::string record_id;
    int64_t r_sample = 0;
    std::vector<float> channels;
    wfdb::BeatClass label = wfdb::BeatClass::Normal;
};

struct DatasetSplit {
    uint64_t seed = 0;
    std::vector<uint32_t> train;
    std::vector<uint32_t> val;
    std::vector<uint32_t> test;
};

// Per-record input to segmentation: physical (mV) leads after any baseline
// correction, plus the raw annotation stream.
struct RecordBeats {
    std::string record_id;
    std::vector<std::vector<double>> physical;
    std::vector<wfdb::AnnotationEvent> annotations;
};

// w = round-to-odd(seconds * fs), clamped to >= 1.
int median_window_samples(double seconds, double fs);

// signal - medfilt(medfilt(signal, w1), w2), edges replicated, length preserved.
std::vector<double> remove_baseline(std::span<const double> signal, double fs, double w1,
                                    double w2);

// Per channel: (x - mean) / max(population-std, epsilon). Flat channels come
// out all-zero. mat is row-major [n_leads][window_len].
void normalize_window(std::span<double> mat, int n_leads, int window_len, double epsilon_std);

// to_physical + optional baseline removal on the configured leads.
RecordBeats prepare_record(const wfdb::Record &record, const PreprocessConfig &config);

// Extracts one window per five-class annotation, centered on the annotated
// sample; windows crossing record boundaries are dropped. Output order is
// record order, then annotation order.
std::vector<BeatWindow> segment_beats(std::span<const RecordBeats> records,
                                      const PreprocessConfig &config);

// Deterministic per-class shuffle + cut at round(n*train) / round(n*(train+val)).
DatasetSplit stratified_split(std::span<const wfdb::BeatClass> labels,
                              std::array<double, 3> fractions, uint64_t seed);

// w_c = N / (5 * n_c). Throws EmptyClass when a class has no members.
std::array<double, 5> class_weights(std::span<const wfdb::BeatClass> labels);

// --- beat-window cache container ("EBW1", little-endian) ---
//   magic "EBW1" | u16 version | u32 n_windows | u16 n_leads | u16 window_len
//   per window: u8 id_len + id bytes | i64 r_sample | u8 label |
//               f32 samples, channel-major
struct BeatCache {
    int n_leads = 0;
    int window_len = 0;
    std::vector<BeatWindow> windows;
};

std::vector<uint8_t> encode_cache(const BeatCache &cache);
BeatCache decode_cache(std::span<const uint8_t> bytes);
void write_cache(const std::filesystem::path &path, const BeatCache &cache);
BeatCache read_cache(const std::filesystem::path &path);

} // namespace ecg::dataset
