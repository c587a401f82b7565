#include "ecgbeatnet/io.hpp"

#include <cstring>
#include <fstream>
#include <unistd.h>

#include "ecgbeatnet/errors.hpp"

namespace ecg::io {

namespace fs = std::filesystem;

std::vector<uint8_t> read_file_bytes(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) {
        throw FileNotFound("cannot open file: " + path.string());
    }
    std::vector<uint8_t> bytes;
    in.seekg(0, std::ios::end);
    bytes.resize(static_cast<size_t>(in.tellg()));
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) {
        throw Error("failed reading file: " + path.string());
    }
    return bytes;
}

std::string read_file_text(const fs::path &path) {
    auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void atomic_write(const fs::path &path, std::span<const uint8_t> bytes) {
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out.is_open()) {
            throw Error("cannot open file for writing: " + tmp.string());
        }
        out.write(reinterpret_cast<const char *>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("failed writing file: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("failed renaming " + tmp.string() + " to " + path.string() + ": " +
                    ec.message());
    }
}

void atomic_write(const fs::path &path, const std::string &text) {
    atomic_write(path, std::span<const uint8_t>(
                           reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

void put_u16(std::vector<uint8_t> &out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
}

void put_u32(std::vector<uint8_t> &out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<uint8_t> &out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_i64(std::vector<uint8_t> &out, int64_t v) {
    put_u64(out, static_cast<uint64_t>(v));
}

void put_f32(std::vector<uint8_t> &out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
}

void ByteReader::need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
        throw CorruptPayload(source_ + ": truncated, need " + std::to_string(n) +
                             " bytes at offset " + std::to_string(pos_) + " of " +
                             std::to_string(bytes_.size()));
    }
}

uint8_t ByteReader::get_u8() {
    need(1);
    return bytes_[pos_++];
}

uint16_t ByteReader::get_u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

uint32_t ByteReader::get_u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t ByteReader::get_u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

int64_t ByteReader::get_i64() {
    return static_cast<int64_t>(get_u64());
}

float ByteReader::get_f32() {
    uint32_t bits = get_u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::string ByteReader::get_string(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
}

void ByteReader::expect_end() const {
    if (pos_ != bytes_.size()) {
        throw CorruptPayload(source_ + ": " + std::to_string(bytes_.size() - pos_) +
                             " unexpected trailing bytes");
    }
}

} // namespace ecg::io
