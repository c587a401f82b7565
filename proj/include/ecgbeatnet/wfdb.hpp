#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecg::wfdb {

// One signal line of a .hea file. Field order follows the on-disk layout.
struct SignalSpec {
    std::string file_name;
    int format_code = 0;
    double adc_gain = 0.0; // raw header value; 0 means "unspecified"
    int baseline = 0;      // ADC units mapping to 0 physical
    int adc_resolution = 12;
    int adc_zero = 0;
    int initial_value = 0;
    int16_t checksum = 0;
    std::string description;

    // Gain actually used for digital -> physical conversion (ADC units per mV).
    double effective_gain() const { return adc_gain == 0.0 ? 200.0 : adc_gain; }
};

struct RecordHeader {
    std::string record_name;
    int n_signals = 0;
    double sampling_frequency = 250.0;
    int64_t n_samples = 0; // 0 = unknown
    std::vector<SignalSpec> signals;
};

// Decoded digital samples, one vector per signal, all the same length.
struct SignalData {
    int n_signals = 0;
    int64_t n_samples = 0;
    std::vector<std::vector<int16_t>> samples;
};

struct AnnotationEvent {
    int64_t sample_index = 0;
    int code = 0; // 1..49
    int subtype = 0;
    int channel = 0;
    int num = 0;
    std::string aux;
};

// The five beat classes the classifier predicts. The integer encoding is part
// of the cache and checkpoint formats and must never change.
enum class BeatClass : uint8_t { Normal = 0, LBBB = 1, RBBB = 2, APC = 3, PVC = 4 };

inline constexpr int kNumClasses = 5;

const char *beat_class_name(BeatClass c);

struct ChecksumEntry {
    int signal = 0;
    int16_t computed = 0;
    int16_t expected = 0;
    bool ok = false;
};

struct ChecksumReport {
    std::vector<ChecksumEntry> entries;
    bool all_ok() const;
};

// Parses the full text of a .hea file. Comment lines (leading '#') and blank
// lines are ignored; tokens beyond the known fields are skipped.
RecordHeader parse_header(std::string_view text);

// Unpacks format-212 bytes: two 12-bit two's-complement samples per 3 bytes,
// signals frame-interleaved. Throws TruncatedSignalFile when bytes are short.
SignalData decode_format212(std::span<const uint8_t> bytes, int n_signals, int64_t n_samples);

// 16-bit signed wrap-around sum of each signal's samples vs. the header field.
// Mismatches are reported, never thrown.
ChecksumReport verify_checksums(const SignalData &data, const RecordHeader &header);

// Parses a complete MIT-format annotation stream.
std::vector<AnnotationEvent> parse_annotations(std::span<const uint8_t> bytes);

// physical[s][t] = (samples[s][t] - baseline_s) / effective_gain_s, in mV.
std::vector<std::vector<double>> to_physical(const SignalData &data, const RecordHeader &header);

// Annotation code -> beat class; codes outside the five-class set map to nullopt.
std::optional<BeatClass> map_beat_class(int code);

// Convenience loader: reads <dir>/<name>.hea, the referenced .dat (format 212)
// and <dir>/<name>.atr (or an explicit annotation file). When the header
// leaves n_samples at 0 the count is inferred from the .dat size.
struct Record {
    RecordHeader header;
    SignalData signals;
    std::vector<AnnotationEvent> annotations;
};

Record load_record(const std::filesystem::path &dir, const std::string &name,
                   const std::filesystem::path &annotations_path = {});

} // namespace ecg::wfdb
