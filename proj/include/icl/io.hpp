#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "icl/errors.hpp"

namespace icl {

// Little-endian binary container helpers shared by the instance, parameter
// and weight serializers.

inline std::uint64_t maybe_swap(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFF);
        return r;
    }
}

inline std::uint32_t maybe_swap(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
    }
}

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        v = maybe_swap(v);
        append(&v, 4);
    }
    void f64(double d) {
        std::uint64_t v = maybe_swap(std::bit_cast<std::uint64_t>(d));
        append(&v, 8);
    }
    void bytes(const void* p, std::size_t n) { append(p, n); }

    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void append(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32(const char* field) {
        require(4, field);
        std::uint32_t v;
        std::memcpy(&v, data_ + pos_, 4);
        pos_ += 4;
        return maybe_swap(v);
    }
    double f64(const char* field) {
        require(8, field);
        std::uint64_t v;
        std::memcpy(&v, data_ + pos_, 8);
        pos_ += 8;
        return std::bit_cast<double>(maybe_swap(v));
    }
    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    void expect_end() const {
        if (pos_ != size_) throw ParseError("trailing bytes after payload", pos_);
    }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

private:
    void require(std::size_t n, const char* field) const {
        if (size_ - pos_ < n)
            throw ParseError(std::string("truncated payload while reading ") + field, pos_);
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

/// FNV-1a 64-bit content hash, used by experiment manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace icl
