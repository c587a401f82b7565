#include "ecgbeatnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"
#include "ecgbeatnet/metrics.hpp"

namespace ecg::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> &all_mitdb_records() {
    static const std::vector<std::string> records = {
        "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112",
        "113", "114", "115", "116", "117", "118", "119", "121", "122", "123", "124", "200",
        "201", "202", "203", "205", "207", "208", "209", "210", "212", "213", "214", "215",
        "217", "219", "220", "221", "222", "223", "228", "230", "231", "232", "233", "234"};
    return records;
}

const std::vector<std::string> &RunConfig::effective_records() const {
    return records.empty() ? all_mitdb_records() : records;
}

void RunConfig::validate() const {
    preprocess.validate();
    model.validate();
    optimizer.validate();
    if (static_cast<int>(preprocess.leads.size()) != model.in_channels) {
        throw ConfigError("model.in_channels (" + std::to_string(model.in_channels) +
                          ") must equal the number of configured leads (" +
                          std::to_string(preprocess.leads.size()) + ")");
    }
    if (preprocess.window_len != model.window_len) {
        throw ConfigError("preprocess.window_len and model.window_len disagree (" +
                          std::to_string(preprocess.window_len) + " vs " +
                          std::to_string(model.window_len) + ")");
    }
    for (double f : split.fractions) {
        if (!(f > 0)) throw ConfigError("split fractions must be positive");
    }
    const double sum = split.fractions[0] + split.fractions[1] + split.fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
    }
    if (effective_records().empty()) {
        throw ConfigError("the record list is empty");
    }
}

namespace {

void reject_unknown_keys(const json &obj, std::initializer_list<const char *> known,
                         const std::string &where) {
    for (const auto &item : obj.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char *k) {
                return item.key() == k;
            }) == known.end()) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

std::string format_fixed(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

std::string metric_or_null(double value) {
    return std::isnan(value) ? "null" : format_fixed(value);
}

} // namespace

RunConfig parse_config_json(const std::string &text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig config;
    reject_unknown_keys(doc, {"data_dir", "cache_path", "records", "preprocess", "model",
                              "optimizer", "split"},
                        "config");
    try {
        if (doc.contains("data_dir")) config.data_dir = doc["data_dir"].get<std::string>();
        if (doc.contains("cache_path")) config.cache_path = doc["cache_path"].get<std::string>();
        if (doc.contains("records")) {
            config.records = doc["records"].get<std::vector<std::string>>();
        }
        if (doc.contains("preprocess")) {
            const json &p = doc["preprocess"];
            reject_unknown_keys(p, {"window_len", "leads", "baseline_filter", "median_win_1",
                                    "median_win_2", "epsilon_std"},
                                "preprocess");
            if (p.contains("window_len")) config.preprocess.window_len = p["window_len"];
            if (p.contains("leads")) {
                config.preprocess.leads = p["leads"].get<std::vector<int>>();
            }
            if (p.contains("baseline_filter")) {
                config.preprocess.baseline_filter = p["baseline_filter"];
            }
            if (p.contains("median_win_1")) config.preprocess.median_win_1 = p["median_win_1"];
            if (p.contains("median_win_2")) config.preprocess.median_win_2 = p["median_win_2"];
            if (p.contains("epsilon_std")) config.preprocess.epsilon_std = p["epsilon_std"];
        }
        if (doc.contains("model")) {
            const json &m = doc["model"];
            reject_unknown_keys(m, {"in_channels", "window_len", "seed"}, "model");
            if (m.contains("in_channels")) config.model.in_channels = m["in_channels"];
            if (m.contains("window_len")) config.model.window_len = m["window_len"];
            if (m.contains("seed")) config.model.seed = m["seed"].get<uint64_t>();
        }
        if (doc.contains("optimizer")) {
            const json &o = doc["optimizer"];
            reject_unknown_keys(o, {"lr", "beta1", "beta2", "eps", "batch_size", "epochs"},
                                "optimizer");
            if (o.contains("lr")) config.optimizer.lr = o["lr"];
            if (o.contains("beta1")) config.optimizer.beta1 = o["beta1"];
            if (o.contains("beta2")) config.optimizer.beta2 = o["beta2"];
            if (o.contains("eps")) config.optimizer.eps = o["eps"];
            if (o.contains("batch_size")) config.optimizer.batch_size = o["batch_size"];
            if (o.contains("epochs")) config.optimizer.epochs = o["epochs"];
        }
        if (doc.contains("split")) {
            const json &s = doc["split"];
            reject_unknown_keys(s, {"fractions", "seed"}, "split");
            if (s.contains("fractions")) {
                const auto fractions = s["fractions"].get<std::vector<double>>();
                if (fractions.size() != 3) {
                    throw ConfigError("split.fractions needs exactly 3 entries");
                }
                std::copy(fractions.begin(), fractions.end(), config.split.fractions.begin());
            }
            if (s.contains("seed")) config.split.seed = s["seed"].get<uint64_t>();
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    return config;
}

RunConfig load_config(const fs::path &path) {
    return parse_config_json(io::read_file_text(path));
}

namespace {

struct LoadedRecordData {
    wfdb::Record record;
    wfdb::ChecksumReport checksums;
};

LoadedRecordData load_and_verify(const RunConfig &config, const std::string &name, bool strict,
                                 std::ostream &out) {
    LoadedRecordData loaded;
    loaded.record = wfdb::load_record(config.data_dir, name);
    loaded.checksums = wfdb::verify_checksums(loaded.record.signals, loaded.record.header);
    for (const wfdb::ChecksumEntry &entry : loaded.checksums.entries) {
        if (!entry.ok) {
            std::ostringstream msg;
            msg << "record " << name << " signal " << entry.signal << ": checksum "
                << entry.computed << ", header says " << entry.expected;
            if (strict) throw Error(msg.str());
            out << "warning: " << msg.str() << "\n";
        }
    }
    return loaded;
}

} // namespace

void cmd_inspect(const RunConfig &config, const std::string &record, Format format, bool strict,
                 std::ostream &out) {
    config.preprocess.validate();
    const LoadedRecordData loaded = load_and_verify(config, record, strict, out);
    const wfdb::RecordHeader &header = loaded.record.header;

    std::map<int, int64_t> histogram;
    for (const auto &event : loaded.record.annotations) histogram[event.code]++;
    std::array<int64_t, 5> class_counts{};
    for (const auto &event : loaded.record.annotations) {
        if (auto cls = wfdb::map_beat_class(event.code)) {
            class_counts[static_cast<size_t>(*cls)]++;
        }
    }
    const double duration =
        static_cast<double>(loaded.record.signals.n_samples) / header.sampling_frequency;

    if (format == Format::Json) {
        ordered_json doc;
        doc["record"] = header.record_name;
        doc["sampling_frequency"] = header.sampling_frequency;
        doc["n_samples"] = loaded.record.signals.n_samples;
        doc["duration_seconds"] = duration;
        doc["leads"] = ordered_json::array();
        for (const auto &spec : header.signals) doc["leads"].push_back(spec.description);
        doc["checksums_ok"] = loaded.checksums.all_ok();
        ordered_json hist = ordered_json::object();
        for (const auto &[code, count] : histogram) hist[std::to_string(code)] = count;
        doc["annotation_histogram"] = hist;
        ordered_json classes = ordered_json::object();
        for (int c = 0; c < wfdb::kNumClasses; ++c) {
            classes[wfdb::beat_class_name(static_cast<wfdb::BeatClass>(c))] =
                class_counts[static_cast<size_t>(c)];
        }
        doc["beat_class_counts"] = classes;
        out << doc.dump(2) << "\n";
        return;
    }

    out << "record " << header.record_name << "\n";
    out << "  sampling frequency: " << header.sampling_frequency << " Hz\n";
    out << "  samples per signal: " << loaded.record.signals.n_samples << " ("
        << format_fixed(duration) << " s)\n";
    out << "  leads:";
    for (const auto &spec : header.signals) out << " " << spec.description;
    out << "\n  checksums: " << (loaded.checksums.all_ok() ? "ok" : "MISMATCH") << "\n";
    out << "  annotations: " << loaded.record.annotations.size() << "\n";
    for (const auto &[code, count] : histogram) {
        out << "    code " << code << ": " << count << "\n";
    }
    int64_t mapped = 0;
    out << "  beat classes:\n";
    for (int c = 0; c < wfdb::kNumClasses; ++c) {
        out << "    " << wfdb::beat_class_name(static_cast<wfdb::BeatClass>(c)) << ": "
            << class_counts[static_cast<size_t>(c)] << "\n";
        mapped += class_counts[static_cast<size_t>(c)];
    }
    out << "  mapped beats: " << mapped << "\n";
}

void cmd_segment(const RunConfig &config, bool strict, std::ostream &out) {
    config.validate();

    dataset::BeatCache cache;
    cache.n_leads = static_cast<int>(config.preprocess.leads.size());
    cache.window_len = config.preprocess.window_len;

    for (const std::string &name : config.effective_records()) {
        const LoadedRecordData loaded = load_and_verify(config, name, strict, out);
        const dataset::RecordBeats beats = dataset::prepare_record(loaded.record, config.preprocess);
        auto windows = dataset::segment_beats(std::span(&beats, 1), config.preprocess);
        cache.windows.insert(cache.windows.end(), std::make_move_iterator(windows.begin()),
                             std::make_move_iterator(windows.end()));
    }

    if (config.cache_path.has_parent_path()) {
        fs::create_directories(config.cache_path.parent_path());
    }
    dataset::write_cache(config.cache_path, cache);

    std::array<int64_t, 5> counts{};
    for (const auto &window : cache.windows) counts[static_cast<size_t>(window.label)]++;
    out << "segmented " << cache.windows.size() << " beats from "
        << config.effective_records().size() << " records into " << config.cache_path.string()
        << "\n";
    for (int c = 0; c < wfdb::kNumClasses; ++c) {
        out << "  " << wfdb::beat_class_name(static_cast<wfdb::BeatClass>(c)) << ": "
            << counts[static_cast<size_t>(c)] << "\n";
    }
}

namespace {

std::string epoch_json_line(const model::EpochStats &stats) {
    std::string line = "{\"epoch\": " + std::to_string(stats.epoch);
    line += ", \"train_loss\": " + format_fixed(stats.train_loss);
    line += ", \"train_accuracy\": " + format_fixed(stats.train_accuracy);
    line += ", \"val_loss\": " + metric_or_null(stats.val_loss);
    line += ", \"val_accuracy\": " + metric_or_null(stats.val_accuracy);
    line += "}";
    return line;
}

std::vector<wfdb::BeatClass> cache_labels(const dataset::BeatCache &cache) {
    std::vector<wfdb::BeatClass> labels;
    labels.reserve(cache.windows.size());
    for (const auto &window : cache.windows) labels.push_back(window.label);
    return labels;
}

void require_cache_matches_model(const dataset::BeatCache &cache, const model::ModelConfig &m,
                                 const fs::path &cache_path) {
    if (cache.n_leads != m.in_channels || cache.window_len != m.window_len) {
        throw ConfigMismatch("cache " + cache_path.string() + " holds " +
                             std::to_string(cache.n_leads) + "-lead windows of length " +
                             std::to_string(cache.window_len) + "; the model is configured for " +
                             std::to_string(m.in_channels) + " leads of length " +
                             std::to_string(m.window_len));
    }
}

} // namespace

void cmd_train(const RunConfig &config, const fs::path &checkpoint_path, const fs::path &log_path,
               int threads, std::ostream &out) {
    config.validate();
    const dataset::BeatCache cache = dataset::read_cache(config.cache_path);
    require_cache_matches_model(cache, config.model, config.cache_path);

    const auto labels = cache_labels(cache);
    const auto split = dataset::stratified_split(labels, config.split.fractions, config.split.seed);

    std::vector<wfdb::BeatClass> train_labels;
    train_labels.reserve(split.train.size());
    for (uint32_t idx : split.train) train_labels.push_back(labels[idx]);
    const auto weights = dataset::class_weights(train_labels);

    out << "training on " << split.train.size() << " beats (val " << split.val.size() << ", test "
        << split.test.size() << ")\n";

    model::NetworkF net(config.model);
    std::string log_lines;
    const model::TrainResult result = model::train(
        net, cache.windows, split, config.optimizer, weights, threads,
        [&](const model::EpochStats &stats) {
            const std::string line = epoch_json_line(stats);
            log_lines += line + "\n";
            out << line << "\n";
        });

    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    io::atomic_write(log_path, log_lines);

    model::CheckpointMeta meta;
    meta.epoch = static_cast<uint32_t>(result.best_epoch > 0 ? result.best_epoch
                                                             : config.optimizer.epochs);
    meta.split_seed = config.split.seed;
    meta.adam_step = static_cast<uint64_t>(result.adam_steps);
    if (checkpoint_path.has_parent_path()) fs::create_directories(checkpoint_path.parent_path());
    model::save_checkpoint(checkpoint_path, net, meta);

    out << "kept epoch " << meta.epoch << " weights -> " << checkpoint_path.string() << "\n";
}

void cmd_eval(const RunConfig &config, const fs::path &checkpoint_path, const fs::path &report_path,
              int threads, std::ostream &out) {
    config.validate();
    const dataset::BeatCache cache = dataset::read_cache(config.cache_path);
    require_cache_matches_model(cache, config.model, config.cache_path);

    model::LoadedCheckpoint loaded = model::load_checkpoint(checkpoint_path, config.model);
    if (loaded.meta.split_seed != config.split.seed) {
        out << "warning: checkpoint was trained with split seed " << loaded.meta.split_seed
            << ", config requests " << config.split.seed
            << "; the test bucket may overlap its training data\n";
    }

    const auto labels = cache_labels(cache);
    const auto split = dataset::stratified_split(labels, config.split.fractions, config.split.seed);

    std::vector<uint8_t> predictions(split.test.size());
    {
        const auto &net = loaded.net;
        const auto &m = net.config();
        model::parallel_for(static_cast<int64_t>(split.test.size()), threads, [&](int64_t i) {
            const auto input = model::window_tensor(
                cache.windows[split.test[static_cast<size_t>(i)]], m.in_channels, m.window_len);
            predictions[static_cast<size_t>(i)] =
                static_cast<uint8_t>(model::predict(net, input).first);
        });
    }

    metrics::ConfusionMatrix cm;
    for (size_t i = 0; i < split.test.size(); ++i) {
        cm.accumulate(cache.windows[split.test[i]].label,
                      static_cast<wfdb::BeatClass>(predictions[i]));
    }
    const metrics::EvalReport rep = metrics::report(cm);
    const std::string rendered = metrics::render_json(rep);
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    io::atomic_write(report_path, rendered);
    out << rendered;
}

void cmd_predict(const RunConfig &config, const fs::path &checkpoint_path,
                 const std::string &record, const fs::path &annotations_path, std::ostream &out) {
    model::LoadedCheckpoint loaded = model::load_checkpoint(checkpoint_path);
    const model::ModelConfig &m = loaded.net.config();

    dataset::PreprocessConfig preprocess = config.preprocess;
    preprocess.window_len = m.window_len;
    preprocess.validate();
    if (static_cast<int>(preprocess.leads.size()) != m.in_channels) {
        throw ConfigMismatch("checkpoint expects " + std::to_string(m.in_channels) +
                             " input leads, config selects " +
                             std::to_string(preprocess.leads.size()));
    }

    const auto rec = wfdb::load_record(config.data_dir, record, annotations_path);
    const auto beats = dataset::prepare_record(rec, preprocess);
    const auto windows = dataset::segment_beats(std::span(&beats, 1), preprocess);

    for (const auto &window : windows) {
        const auto input = model::window_tensor(window, m.in_channels, m.window_len);
        const auto [cls, probs] = model::predict(loaded.net, input);
        out << window.r_sample << " " << wfdb::beat_class_name(cls);
        for (float p : probs.data) out << " " << format_fixed(p);
        out << "\n";
    }
}

} // namespace ecg::cli
