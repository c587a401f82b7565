#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ecgbeatnet/dataset.hpp"
#include "ecgbeatnet/model.hpp"

namespace ecg::cli {

enum class Format { Text, Json };

struct SplitConfig {
    std::array<double, 3> fractions = {0.8, 0.1, 0.1};
    uint64_t seed = 42;
};

struct RunConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path cache_path = "beats.ebw";
    std::vector<std::string> records; // empty = the full 48-record list
    dataset::PreprocessConfig preprocess;
    model::ModelConfig model;
    model::AdamHyper optimizer;
    SplitConfig split;

    const std::vector<std::string> &effective_records() const;
    void validate() const;
};

// The 48 records of the arrhythmia database.
const std::vector<std::string> &all_mitdb_records();

RunConfig parse_config_json(const std::string &text);
RunConfig load_config(const std::filesystem::path &path);

struct FetchOptions {
    std::string url_base = "https://physionet.org/files/mitdb/1.0.0/";
    int jobs = 4;
    int retry_attempts = 3;
    int retry_delay_ms = 500;
};

std::string sha256_hex(std::span<const uint8_t> bytes);

// Command implementations. Each prints to `out` and throws a structured error
// on failure; exit-code mapping happens in run_cli.
void cmd_fetch(const RunConfig &config, const FetchOptions &options, std::ostream &out);
void cmd_inspect(const RunConfig &config, const std::string &record, Format format, bool strict,
                 std::ostream &out);
void cmd_segment(const RunConfig &config, bool strict, std::ostream &out);
void cmd_train(const RunConfig &config, const std::filesystem::path &checkpoint_path,
               const std::filesystem::path &log_path, int threads, std::ostream &out);
void cmd_eval(const RunConfig &config, const std::filesystem::path &checkpoint_path,
              const std::filesystem::path &report_path, int threads, std::ostream &out);
void cmd_predict(const RunConfig &config, const std::filesystem::path &checkpoint_path,
                 const std::string &record, const std::filesystem::path &annotations_path,
                 std::ostream &out);

// Full argv-level entry point. Returns the process exit code:
//   0 success, 1 usage/config error, 2 data/parse error, 3 network error.
int run_cli(int argc, const char *const argv[], std::ostream &out, std::ostream &err);

} // namespace ecg::cli
