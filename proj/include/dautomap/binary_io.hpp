#pragma once

// Little-endian byte buffers for the on-disk formats. Reads are bounds-checked and
// report the failing offset.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dautomap/error.hpp"

namespace dautomap {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }

    void put_magic(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

    template <class T>
        requires std::is_arithmetic_v<T>
    void put_array(const T* data, std::size_t n) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n * sizeof(T));
    }

    const Bytes& bytes() const noexcept { return bytes_; }
    Bytes take() noexcept { return std::move(bytes_); }

private:
    Bytes bytes_;
};

class ByteReader {
public:
    ByteReader(const Bytes& bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get(const char* field) {
        T value;
        std::memcpy(&value, take(sizeof(T), field), sizeof(T));
        return value;
    }

    void expect_magic(std::string_view magic) {
        const std::size_t at = pos_;
        const auto* p = take(magic.size(), "magic");
        if (std::memcmp(p, magic.data(), magic.size()) != 0)
            throw FormatError(context_ + ": bad magic, expected \"" + std::string(magic) + "\"", at);
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void get_array(T* out, std::size_t n, const char* field) {
        if (n > remaining() / sizeof(T)) fail(std::string("truncated ") + field);
        std::memcpy(out, take(n * sizeof(T), field), n * sizeof(T));
    }

    void expect_end() const {
        if (pos_ != bytes_.size()) throw FormatError(context_ + ": trailing bytes", pos_);
    }

    [[noreturn]] void fail(const std::string& what) const { throw FormatError(context_ + ": " + what, pos_); }
    [[noreturn]] void fail_at(const std::string& what, std::size_t at) const {
        throw FormatError(context_ + ": " + what, at);
    }

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    const std::uint8_t* take(std::size_t n, const char* field) {
        if (n > remaining()) fail(std::string("truncated ") + field);
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    const Bytes& bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

}  // namespace dautomap
