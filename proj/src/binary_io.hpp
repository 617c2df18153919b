#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zsl::detail {

/// Little-endian byte buffer writer.
class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <typename T>
    void le(T value) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<unsigned char>((static_cast<std::make_unsigned_t<T>>(value) >> (8 * i)) & 0xff));
        }
    }

    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<unsigned char>& data() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<unsigned char> buf_;
};

/// Little-endian reader over an in-memory buffer. Every read past the end
/// throws FormatError carrying `truncated_message`.
class ByteReader {
public:
    ByteReader(std::span<const unsigned char> data, std::string truncated_message)
        : data_(data), truncated_(std::move(truncated_message)) {}

    std::string bytes(std::size_t n);

    template <typename T>
    T le() {
        require(sizeof(T));
        std::make_unsigned_t<T> v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::make_unsigned_t<T>>(data_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void require(std::size_t n) const;

private:
    std::span<const unsigned char> data_;
    std::size_t pos_ = 0;
    std::string truncated_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> data);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_exact(double v);

}  // namespace zsl::detail
