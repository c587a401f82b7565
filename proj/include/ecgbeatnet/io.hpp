#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ecg::io {

std::vector<uint8_t> read_file_bytes(const std::filesystem::path &path);
std::string read_file_text(const std::filesystem::path &path);

// Writes to <path>.tmp.<pid> then renames, so a crashed or failed write never
// leaves a partial file at the destination.
void atomic_write(const std::filesystem::path &path, std::span<const uint8_t> bytes);
void atomic_write(const std::filesystem::path &path, const std::string &text);

// Little-endian append/read helpers shared by the binary container formats.
void put_u16(std::vector<uint8_t> &out, uint16_t v);
void put_u32(std::vector<uint8_t> &out, uint32_t v);
void put_u64(std::vector<uint8_t> &out, uint64_t v);
void put_i64(std::vector<uint8_t> &out, int64_t v);
void put_f32(std::vector<uint8_t> &out, float v);

// Cursor-based reader; every get_* checks bounds and throws CorruptPayload.
class ByteReader {
public:
    ByteReader(std::span<const uint8_t> bytes, std::string source)
        : bytes_(bytes), source_(std::move(source)) {}

    uint8_t get_u8();
    uint16_t get_u16();
    uint32_t get_u32();
    uint64_t get_u64();
    int64_t get_i64();
    float get_f32();
    std::string get_string(size_t n);
    size_t remaining() const { return bytes_.size() - pos_; }
    void expect_end() const;

private:
    void need(size_t n) const;
    std::span<const uint8_t> bytes_;
    std::string source_;
    size_t pos_ = 0;
};

} // namespace ecg::io
