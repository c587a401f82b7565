#include "ecgbeatnet/wfdb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"

namespace ecg::wfdb {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.emplace_back(line.substr(start, i - start));
    }
    return tokens;
}

long parse_long(const std::string &token, const char *field) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw MalformedHeader(std::string("non-numeric ") + field + " field: '" + token + "'");
    }
    return value;
}

// Leading number of a token that may carry suffixes, e.g. "212x1" or
// "360/360". Used for the format and sampling-frequency fields.
double parse_leading_double(const std::string &token, const char *field) {
    size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &pos);
    } catch (...) {
        throw MalformedHeader(std::string("non-numeric ") + field + " field: '" + token + "'");
    }
    if (pos == 0) {
        throw MalformedHeader(std::string("non-numeric ") + field + " field: '" + token + "'");
    }
    return value;
}

int16_t sign_extend_12(int raw) {
    return static_cast<int16_t>((raw & 0x800) ? raw - 0x1000 : raw);
}

// Parses the gain token, which may carry a parenthesized baseline and a
// "/units" suffix: "200", "200(1024)", "200(1024)/mV".
void parse_gain_token(const std::string &token, SignalSpec &spec, bool &baseline_given) {
    std::string body = token;
    const size_t slash = body.find('/');
    if (slash != std::string::npos) body = body.substr(0, slash);

    const size_t open = body.find('(');
    if (open != std::string::npos) {
        const size_t close = body.find(')', open);
        if (close == std::string::npos) {
            throw MalformedHeader("unterminated baseline in gain field: '" + token + "'");
        }
        spec.baseline = static_cast<int>(parse_long(body.substr(open + 1, close - open - 1),
                                                    "baseline"));
        baseline_given = true;
        body = body.substr(0, open);
    }
    spec.adc_gain = parse_leading_double(body, "gain");
}

} // namespace

const char *beat_class_name(BeatClass c) {
    switch (c) {
    case BeatClass::Normal: return "Normal";
    case BeatClass::LBBB: return "LBBB";
    case BeatClass::RBBB: return "RBBB";
    case BeatClass::APC: return "APC";
    case BeatClass::PVC: return "PVC";
    }
    return "?";
}

bool ChecksumReport::all_ok() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const ChecksumEntry &e) { return e.ok; });
}

RecordHeader parse_header(std::string_view text) {
    std::vector<std::string> lines;
    {
        size_t start = 0;
        while (start <= text.size()) {
            size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
            if (!blank && line[line.find_first_not_of(" \t")] != '#') {
                lines.emplace_back(line);
            }
            if (end == text.size()) break;
            start = end + 1;
        }
    }
    if (lines.empty()) {
        throw MalformedHeader("header has no record line");
    }

    RecordHeader header;
    {
        auto tokens = tokenize(lines[0]);
        if (tokens.size() < 2) {
            throw MalformedHeader("record line needs at least a name and a signal count");
        }
        header.record_name = tokens[0];
        header.n_signals = static_cast<int>(parse_long(tokens[1], "signal count"));
        if (header.n_signals < 1) {
            throw MalformedHeader("signal count must be positive, got " + tokens[1]);
        }
        if (tokens.size() >= 3) {
            header.sampling_frequency = parse_leading_double(tokens[2], "sampling frequency");
            if (header.sampling_frequency <= 0) {
                throw MalformedHeader("sampling frequency must be positive: '" + tokens[2] + "'");
            }
        }
        if (tokens.size() >= 4) {
            const long n = parse_long(tokens[3], "sample count");
            if (n < 0) throw MalformedHeader("negative sample count: '" + tokens[3] + "'");
            header.n_samples = n;
        }
        // Later tokens (base time, base date) are not used here.
    }

    if (lines.size() < static_cast<size_t>(header.n_signals) + 1) {
        throw MalformedHeader("expected " + std::to_string(header.n_signals) +
                              " signal lines, found " + std::to_string(lines.size() - 1));
    }
    for (int s = 0; s < header.n_signals; ++s) {
        auto tokens = tokenize(lines[static_cast<size_t>(s) + 1]);
        if (tokens.size() < 2) {
            throw MalformedHeader("signal line " + std::to_string(s) +
                                  " needs at least a file name and a format");
        }
        SignalSpec spec;
        spec.file_name = tokens[0];
        spec.format_code = static_cast<int>(parse_leading_double(tokens[1], "format"));
        bool baseline_given = false;
        if (tokens.size() >= 3) parse_gain_token(tokens[2], spec, baseline_given);
        if (tokens.size() >= 4)
            spec.adc_resolution = static_cast<int>(parse_long(tokens[3], "ADC resolution"));
        if (tokens.size() >= 5)
            spec.adc_zero = static_cast<int>(parse_long(tokens[4], "ADC zero"));
        spec.initial_value = spec.adc_zero;
        if (tokens.size() >= 6)
            spec.initial_value = static_cast<int>(parse_long(tokens[5], "initial value"));
        if (tokens.size() >= 7)
            spec.checksum = static_cast<int16_t>(parse_long(tokens[6], "checksum"));
        // tokens[7] is the block size, unused.
        if (tokens.size() >= 9) {
            std::string desc = tokens[8];
            for (size_t i = 9; i < tokens.size(); ++i) desc += " " + tokens[i];
            spec.description = desc;
        }
        if (!baseline_given) spec.baseline = spec.adc_zero;
        header.signals.push_back(std::move(spec));
    }
    return header;
}

SignalData decode_format212(std::span<const uint8_t> bytes, int n_signals, int64_t n_samples) {
    if (n_signals < 1) {
        throw MalformedHeader("signal count must be positive");
    }
    const int64_t total = static_cast<int64_t>(n_signals) * n_samples;
    const int64_t need = (total * 3 + 1) / 2;
    if (static_cast<int64_t>(bytes.size()) < need) {
        throw TruncatedSignalFile("format-212 stream holds " + std::to_string(bytes.size()) +
                                  " bytes, need " + std::to_string(need) + " for " +
                                  std::to_string(total) + " samples");
    }

    SignalData data;
    data.n_signals = n_signals;
    data.n_samples = n_samples;
    data.samples.assign(static_cast<size_t>(n_signals),
                        std::vector<int16_t>(static_cast<size_t>(n_samples)));

    size_t byte_pos = 0;
    for (int64_t i = 0; i < total; i += 2) {
        const uint8_t b0 = bytes[byte_pos];
        const uint8_t b1 = bytes[byte_pos + 1];
        const int16_t first = sign_extend_12(((b1 & 0x0F) << 8) | b0);
        data.samples[static_cast<size_t>(i % n_signals)][static_cast<size_t>(i / n_signals)] =
            first;
        if (i + 1 < total) {
            const uint8_t b2 = bytes[byte_pos + 2];
            const int16_t second = sign_extend_12(((b1 & 0xF0) << 4) | b2);
            data.samples[static_cast<size_t>((i + 1) % n_signals)]
                        [static_cast<size_t>((i + 1) / n_signals)] = second;
            byte_pos += 3;
        } else {
            byte_pos += 2;
        }
    }
    return data;
}

ChecksumReport verify_checksums(const SignalData &data, const RecordHeader &header) {
    if (data.n_signals != header.n_signals) {
        throw ShapeMismatch("decoded " + std::to_string(data.n_signals) +
                            " signals but header declares " + std::to_string(header.n_signals));
    }
    ChecksumReport report;
    for (int s = 0; s < data.n_signals; ++s) {
        uint16_t sum = 0;
        for (int16_t v : data.samples[static_cast<size_t>(s)]) {
            sum = static_cast<uint16_t>(sum + static_cast<uint16_t>(v));
        }
        ChecksumEntry entry;
        entry.signal = s;
        entry.computed = static_cast<int16_t>(sum);
        entry.expected = header.signals[static_cast<size_t>(s)].checksum;
        entry.ok = entry.computed == entry.expected;
        report.entries.push_back(entry);
    }
    return report;
}

std::vector<AnnotationEvent> parse_annotations(std::span<const uint8_t> bytes) {
    std::vector<AnnotationEvent> events;
    int64_t time = 0;
    int channel_state = 0;
    int num_state = 0;
    size_t pos = 0;

    auto need = [&](size_t n, const char *what) {
        if (pos + n > bytes.size()) {
            throw TruncatedAnnotationFile(std::string("annotation stream ends inside ") + what +
                                          " at offset " + std::to_string(pos));
        }
    };

    while (true) {
        need(2, "an annotation word");
        const uint16_t word = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        const int code = word >> 10;
        const int delta = word & 0x3FF;

        if (code == 0 && delta == 0) break; // terminator

        switch (code) {
        case 59: { // SKIP: signed 32-bit offset, high 16-bit word first
            need(4, "a SKIP offset");
            const uint32_t high = static_cast<uint32_t>(bytes[pos] | (bytes[pos + 1] << 8));
            const uint32_t low = static_cast<uint32_t>(bytes[pos + 2] | (bytes[pos + 3] << 8));
            pos += 4;
            time += static_cast<int32_t>((high << 16) | low);
            break;
        }
        case 60: // NUM: applies to the preceding event and persists
            num_state = delta;
            if (!events.empty()) events.back().num = delta;
            break;
        case 61: // SUB: preceding event only
            if (!events.empty()) events.back().subtype = delta;
            break;
        case 62: // CHN: applies to the preceding event and persists
            channel_state = delta;
            if (!events.empty()) events.back().channel = delta;
            break;
        case 63: { // AUX: delta bytes, plus a pad byte when delta is odd
            const size_t len = static_cast<size_t>(delta);
            const size_t stored = len + (len % 2);
            need(stored, "AUX data");
            if (!events.empty()) {
                events.back().aux.assign(reinterpret_cast<const char *>(bytes.data() + pos), len);
            }
            pos += stored;
            break;
        }
        default:
            if (code >= 50 && code <= 58) {
                throw UnknownPseudoCodeLayout("annotation pseudo-code " + std::to_string(code) +
                                              " at offset " + std::to_string(pos - 2) +
                                              " has no defined layout");
            }
            time += delta;
            if (code != 0) { // code 0 with a nonzero delta advances time only
                AnnotationEvent event;
                event.sample_index = time;
                event.code = code;
                event.channel = channel_state;
                event.num = num_state;
                events.push_back(std::move(event));
            }
            break;
        }
    }
    // negative SKIPs are legal, but the emitted stream must stay sorted
    for (size_t i = 1; i < events.size(); ++i) {
        if (events[i].sample_index < events[i - 1].sample_index) {
            throw Error("annotation stream is not sorted: event " + std::to_string(i) + " at " +
                        std::to_string(events[i].sample_index) + " precedes its predecessor at " +
                        std::to_string(events[i - 1].sample_index));
        }
    }
    return events;
}

std::vector<std::vector<double>> to_physical(const SignalData &data, const RecordHeader &header) {
    if (data.n_signals != header.n_signals) {
        throw ShapeMismatch("decoded " + std::to_string(data.n_signals) +
                            " signals but header declares " + std::to_string(header.n_signals));
    }
    std::vector<std::vector<double>> physical(static_cast<size_t>(data.n_signals));
    for (int s = 0; s < data.n_signals; ++s) {
        const SignalSpec &spec = header.signals[static_cast<size_t>(s)];
        const double gain = spec.effective_gain();
        const double baseline = spec.baseline;
        const auto &digital = data.samples[static_cast<size_t>(s)];
        auto &out = physical[static_cast<size_t>(s)];
        out.resize(digital.size());
        for (size_t t = 0; t < digital.size(); ++t) {
            out[t] = (static_cast<double>(digital[t]) - baseline) / gain;
        }
    }
    return physical;
}

std::optional<BeatClass> map_beat_class(int code) {
    switch (code) {
    case 1: return BeatClass::Normal;
    case 2: return BeatClass::LBBB;
    case 3: return BeatClass::RBBB;
    case 5: return BeatClass::PVC;
    case 8: return BeatClass::APC;
    default: return std::nullopt;
    }
}

Record load_record(const std::filesystem::path &dir, const std::string &name,
                   const std::filesystem::path &annotations_path) {
    Record record;
    record.header = parse_header(io::read_file_text(dir / (name + ".hea")));

    for (const SignalSpec &spec : record.header.signals) {
        if (spec.format_code != 212) {
            throw UnsupportedFormat("record " + name + " uses signal format " +
                                    std::to_string(spec.format_code) + "; only 212 is supported");
        }
        if (spec.file_name != record.header.signals[0].file_name) {
            throw UnsupportedFormat("record " + name +
                                    " spreads signals over multiple .dat files");
        }
    }

    const auto dat = io::read_file_bytes(dir / record.header.signals[0].file_name);
    int64_t n_samples = record.header.n_samples;
    if (n_samples == 0) {
        n_samples = static_cast<int64_t>(dat.size()) * 2 / 3 / record.header.n_signals;
    }
    record.signals = decode_format212(dat, record.header.n_signals, n_samples);

    const std::filesystem::path atr =
        annotations_path.empty() ? dir / (name + ".atr") : annotations_path;
    record.annotations = parse_annotations(io::read_file_bytes(atr));
    return record;
}

} // namespace ecg::wfdb
