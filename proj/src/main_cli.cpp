#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgbeatnet/cli.hpp"
#include "ecgbeatnet/errors.hpp"

namespace ecg::cli {

int run_cli(int argc, const char *const argv[], std::ostream &out, std::ostream &err) {
    CLI::App app{"MIT-BIH arrhythmia beat classification toolkit"};
    app.name("ecg-beatnet");
    app.require_subcommand(1);

    std::string config_path, data_dir, cache_path, format_name = "text";
    std::vector<std::string> records;
    uint64_t seed = 0;
    bool strict = false;
    int threads = 1;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--data-dir", data_dir, "directory with .hea/.dat/.atr files");
    app.add_option("--cache", cache_path, "beat-window cache file");
    app.add_option("--records", records, "record names (comma separated)")->delimiter(',');
    auto *seed_opt = app.add_option("--seed", seed, "seed used for the split and the model");
    app.add_option("--format", format_name, "output format")
        ->check(CLI::IsMember({"text", "json"}));
    app.add_flag("--strict", strict, "abort on signal checksum mismatches");
    app.add_option("--threads", threads, "worker threads for batch work")
        ->check(CLI::PositiveNumber);

    // fetch
    FetchOptions fetch_options;
    auto *fetch = app.add_subcommand("fetch", "download records and verify digests");
    fetch->add_option("--url-base", fetch_options.url_base, "distribution base URL");
    fetch->add_option("--jobs", fetch_options.jobs, "parallel downloads")
        ->check(CLI::PositiveNumber);
    fetch->add_option("--retry-attempts", fetch_options.retry_attempts, "attempts per file")
        ->check(CLI::PositiveNumber);
    fetch->add_option("--retry-delay-ms", fetch_options.retry_delay_ms,
                      "base backoff delay in milliseconds");

    // inspect
    std::string record_name;
    auto *inspect = app.add_subcommand("inspect", "summarize one record");
    inspect->add_option("record", record_name, "record name, e.g. 100")->required();

    // segment
    auto *segment = app.add_subcommand("segment", "build the normalized beat-window cache");

    // train
    std::string checkpoint_path = "model.ebnc";
    std::string log_path = "train_log.jsonl";
    int epochs_override = 0;
    int batch_override = 0;
    double lr_override = -1.0;
    auto *train = app.add_subcommand("train", "train the classifier on the cached beats");
    train->add_option("--checkpoint", checkpoint_path, "output checkpoint path");
    train->add_option("--log", log_path, "per-epoch JSON-lines log path");
    auto *epochs_opt = train->add_option("--epochs", epochs_override, "override epoch count");
    auto *batch_opt = train->add_option("--batch-size", batch_override, "override batch size");
    auto *lr_opt = train->add_option("--lr", lr_override, "override learning rate");

    // eval
    std::string report_path = "eval_report.json";
    auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on the test bucket");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate");
    eval->add_option("--out", report_path, "metrics report output path");

    // predict
    std::string annotations_path;
    auto *predict = app.add_subcommand("predict", "per-beat predictions for one record");
    predict->add_option("record", record_name, "record name, e.g. 100")->required();
    predict->add_option("--checkpoint", checkpoint_path, "checkpoint to run");
    predict->add_option("--annotations", annotations_path,
                        "annotation file supplying beat fiducials (default <record>.atr)");

    for (auto *sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) config = load_config(config_path);
        if (const char *env = std::getenv("ECG_BEATNET_DATA"); env && data_dir.empty()) {
            config.data_dir = env;
        }
        if (!data_dir.empty()) config.data_dir = data_dir;
        if (!cache_path.empty()) config.cache_path = cache_path;
        if (!records.empty()) config.records = records;
        if (seed_opt->count() > 0) {
            config.split.seed = seed;
            config.model.seed = seed;
        }
        if (epochs_opt->count() > 0) config.optimizer.epochs = epochs_override;
        if (batch_opt->count() > 0) config.optimizer.batch_size = batch_override;
        if (lr_opt->count() > 0) config.optimizer.lr = lr_override;
        const Format format = format_name == "json" ? Format::Json : Format::Text;

        if (fetch->parsed()) {
            cmd_fetch(config, fetch_options, out);
        } else if (inspect->parsed()) {
            cmd_inspect(config, record_name, format, strict, out);
        } else if (segment->parsed()) {
            cmd_segment(config, strict, out);
        } else if (train->parsed()) {
            cmd_train(config, checkpoint_path, log_path, threads, out);
        } else if (eval->parsed()) {
            cmd_eval(config, checkpoint_path, report_path, threads, out);
        } else if (predict->parsed()) {
            cmd_predict(config, checkpoint_path, record_name, annotations_path, out);
        }
        return 0;
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NetworkError &e) {
        err << "network error: " << e.what() << "\n";
        return 3;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace ecg::cli
