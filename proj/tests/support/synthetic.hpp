#pragma once

// Test-only helpers: encoders that invert the production decoders (used as
// round-trip oracles) and a synthetic record generator that writes complete
// .hea/.dat/.atr triples with class-distinct beat morphologies.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ecgbeatnet/dataset.hpp"
#include "ecgbeatnet/wfdb.hpp"

namespace testsupport {

// Inverse of decode_format212 for a frame-interleaved sample stream.
std::vector<uint8_t> encode_format212(const std::vector<std::vector<int16_t>> &signals);

// Renders a .hea text that parse_header reads back to the same fields.
std::string render_header(const ecg::wfdb::RecordHeader &header);

// MIT-format annotation stream builder.
class AnnotationWriter {
public:
    void event(int64_t sample_index, int code);
    void skip(int32_t offset);
    void num(int value);
    void sub(int value);
    void chn(int value);
    void aux(const std::string &payload);
    std::vector<uint8_t> finish() const; // appends the zero terminator

private:
    void put_word(int code, int delta);
    std::vector<uint8_t> bytes_;
    int64_t last_time_ = 0;
};

struct SyntheticBeat {
    int64_t r_sample = 0;
    int code = 1;
};

struct SyntheticRecordSpec {
    std::string name = "s00";
    double fs = 360.0;
    int64_t n_samples = 30000;
    int n_leads = 2;
    uint64_t noise_seed = 1;
    std::vector<SyntheticBeat> beats;
};

// Evenly spaced beats cycling through the five mapped codes; optionally mixes
// in rhythm-style events (code 28) that the class mapping must reject.
SyntheticRecordSpec make_default_spec(std::string name, int64_t n_samples, uint64_t seed,
                                      bool include_unmapped);

// Physical waveform in mV for one lead of one beat class, sampled at offset
// seconds from the R-peak.
double beat_shape(ecg::wfdb::BeatClass cls, int lead, double seconds_from_r);

// Synthesizes the waveform, digitizes it (gain 200, zero 1024), and writes
// <name>.hea/.dat/.atr into dir.
void write_synthetic_record(const std::filesystem::path &dir, const SyntheticRecordSpec &spec);

// Normalized beat windows built directly (no files); per_class of each label,
// ordered by class then instance, each with its own noise.
std::vector<ecg::dataset::BeatWindow> synthetic_windows(int per_class, int window_len,
                                                        int n_leads, uint64_t seed);

} // namespace testsupport
