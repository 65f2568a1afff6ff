#pragma once
// Little-endian byte stream helpers shared by the binary formats.

#include "uod/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace uod::detail {

template <typename T>
T to_little(T v) noexcept {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        v = to_little(v);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    template <typename T>
    void put_all(std::span<const T> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            const auto* p = reinterpret_cast<const std::uint8_t*>(vs.data());
            out_.insert(out_.end(), p, p + vs.size_bytes());
        } else {
            for (const T& v : vs) put(v);
        }
    }
    void put_bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    template <typename T>
    void get_all(std::span<T> dst, const char* what) {
        need(dst.size_bytes(), what);
        std::memcpy(dst.data(), in_.data() + pos_, dst.size_bytes());
        pos_ += dst.size_bytes();
        if constexpr (std::endian::native == std::endian::big) {
            for (T& v : dst) v = to_little(v);
        }
    }
    std::string get_bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n) {
            throw FormatError(FormatErrorKind::truncated, std::string("truncated file while reading ") + what);
        }
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace uod::detail
