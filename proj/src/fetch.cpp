#include <chrono>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "ecgbeatnet/cli.hpp"
#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"

namespace ecg::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::span<const uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

namespace {

struct ManifestEntry {
    uint64_t size = 0;
    std::string sha256;
};

using Manifest = std::map<std::string, ManifestEntry>;

Manifest load_manifest(const fs::path &path) {
    Manifest manifest;
    if (!fs::exists(path)) return manifest;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file_text(path));
    } catch (const nlohmann::json::exception &e) {
        throw CorruptPayload("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto &item : doc.items()) {
        ManifestEntry entry;
        entry.size = item.value().at("size").get<uint64_t>();
        entry.sha256 = item.value().at("sha256").get<std::string>();
        manifest[item.key()] = entry;
    }
    return manifest;
}

void store_manifest(const fs::path &path, const Manifest &manifest) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto &[name, entry] : manifest) {
        doc[name] = {{"size", entry.size}, {"sha256", entry.sha256}};
    }
    io::atomic_write(path, doc.dump(2) + "\n");
}

struct UrlParts {
    std::string scheme_host; // e.g. "https://physionet.org"
    std::string path_prefix; // e.g. "/files/mitdb/1.0.0/"
};

UrlParts split_url(const std::string &url_base) {
    const size_t scheme_end = url_base.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("url base must start with http:// or https://, got '" + url_base + "'");
    }
    const size_t host_end = url_base.find('/', scheme_end + 3);
    UrlParts parts;
    if (host_end == std::string::npos) {
        parts.scheme_host = url_base;
        parts.path_prefix = "/";
    } else {
        parts.scheme_host = url_base.substr(0, host_end);
        parts.path_prefix = url_base.substr(host_end);
    }
    if (parts.path_prefix.back() != '/') parts.path_prefix += '/';
    return parts;
}

std::vector<uint8_t> download(const UrlParts &url, const std::string &file,
                              const FetchOptions &options) {
    std::string last_error;
    for (int attempt = 0; attempt < options.retry_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.retry_delay_ms << (attempt - 1)));
        }
        httplib::Client client(url.scheme_host);
        client.set_connection_timeout(15, 0);
        client.set_read_timeout(120, 0);
        client.set_follow_location(true);
        auto res = client.Get(url.path_prefix + file);
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        return std::vector<uint8_t>(res->body.begin(), res->body.end());
    }
    throw NetworkError("failed to fetch " + url.scheme_host + url.path_prefix + file + " after " +
                       std::to_string(options.retry_attempts) + " attempts: " + last_error);
}

} // namespace

void cmd_fetch(const RunConfig &config, const FetchOptions &options, std::ostream &out) {
    const UrlParts url = split_url(options.url_base);
    const std::vector<std::string> &records = config.effective_records();
    fs::create_directories(config.data_dir);
    const fs::path manifest_path = config.data_dir / "manifest.json";

    std::mutex state_mutex; // guards the manifest and the byte counter
    Manifest manifest = load_manifest(manifest_path);
    uint64_t bytes_downloaded = 0;
    int files_downloaded = 0, files_cached = 0;
    std::vector<std::string> record_logs(records.size());

    static const char *kExtensions[] = {"hea", "dat", "atr"};

    model::parallel_for(static_cast<int64_t>(records.size()), options.jobs, [&](int64_t i) {
        const std::string &record = records[static_cast<size_t>(i)];
        std::ostringstream log;
        for (const char *ext : kExtensions) {
            const std::string file = record + "." + ext;
            const fs::path target = config.data_dir / file;

            ManifestEntry expected;
            bool have_expected = false;
            {
                std::lock_guard<std::mutex> lock(state_mutex);
                auto it = manifest.find(file);
                if (it != manifest.end()) {
                    expected = it->second;
                    have_expected = true;
                }
            }

            if (fs::exists(target)) {
                const auto bytes = io::read_file_bytes(target);
                const std::string digest = sha256_hex(bytes);
                if (!have_expected) {
                    // Present but unrecorded: adopt it (trust on first use).
                    std::lock_guard<std::mutex> lock(state_mutex);
                    manifest[file] = {bytes.size(), digest};
                    store_manifest(manifest_path, manifest);
                    log << "  " << file << ": recorded existing file (" << bytes.size()
                        << " bytes)\n";
                    ++files_cached;
                    continue;
                }
                if (digest == expected.sha256 && bytes.size() == expected.size) {
                    log << "  " << file << ": ok (cached)\n";
                    std::lock_guard<std::mutex> lock(state_mutex);
                    ++files_cached;
                    continue;
                }
                log << "  " << file << ": digest mismatch, re-downloading\n";
            }

            const auto bytes = download(url, file, options);
            const std::string digest = sha256_hex(bytes);
            if (have_expected && digest != expected.sha256) {
                throw DigestMismatch("file " + file + " downloaded with digest " + digest +
                                     ", manifest records " + expected.sha256);
            }
            io::atomic_write(target, bytes);
            {
                std::lock_guard<std::mutex> lock(state_mutex);
                manifest[file] = {bytes.size(), digest};
                store_manifest(manifest_path, manifest);
                bytes_downloaded += bytes.size();
                ++files_downloaded;
            }
            log << "  " << file << ": downloaded " << bytes.size() << " bytes\n";
        }
        record_logs[static_cast<size_t>(i)] = log.str();
    });

    for (size_t i = 0; i < records.size(); ++i) {
        out << records[i] << "\n" << record_logs[i];
    }
    out << "fetch complete: " << files_downloaded << " files downloaded (" << bytes_downloaded
        << " bytes), " << files_cached << " already present\n";
}

} // namespace ecg::cli
