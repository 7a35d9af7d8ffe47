#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnslab {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

// Big-endian (network order) primitives.

inline void put_u8(Bytes& b, uint8_t v) { b.push_back(v); }

inline void put_u16(Bytes& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v & 0xff));
}

inline void put_u32(Bytes& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v >> 24));
    b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    b.push_back(static_cast<uint8_t>(v & 0xff));
}

inline void set_u16(Bytes& b, size_t off, uint16_t v) {
    b[off] = static_cast<uint8_t>(v >> 8);
    b[off + 1] = static_cast<uint8_t>(v & 0xff);
}

// Bounds-checked big-endian reader.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }
    ByteView view() const { return data_; }

    void seek(size_t p) {
        if (p > data_.size()) throw std::out_of_range("ByteReader::seek past end");
        pos_ = p;
    }

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = (static_cast<uint32_t>(data_[pos_]) << 24) |
                     (static_cast<uint32_t>(data_[pos_ + 1]) << 16) |
                     (static_cast<uint32_t>(data_[pos_ + 2]) << 8) |
                     static_cast<uint32_t>(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }
    Bytes take(size_t n) {
        need(n);
        Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size()) throw std::out_of_range("ByteReader: truncated input");
    }
    ByteView data_;
    size_t pos_ = 0;
};

// FNV-1a, used for event-log and report digests.
inline uint64_t fnv1a64(ByteView data, uint64_t h = 0xcbf29ce484222325ull) {
    for (uint8_t b : data) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(ByteView(reinterpret_cast<const uint8_t*>(s.data()), s.size()), h);
}

inline std::string hex_u64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Offset-annotated hex dump, 16 bytes per row: "0010  aa bb ...".
inline std::string hex_dump(ByteView data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (size_t i = 0; i < data.size(); i += 16) {
        char off[8];
        std::snprintf(off, sizeof off, "%04zx", i);
        out += off;
        out += ' ';
        for (size_t j = i; j < i + 16 && j < data.size(); ++j) {
            out += ' ';
            out += digits[data[j] >> 4];
            out += digits[data[j] & 0xf];
        }
        out += '\n';
    }
    return out;
}

// Inverse of hex_dump: ignores offsets, comments (# ...) and whitespace.
inline Bytes parse_hex_dump(const std::string& text) {
    Bytes out;
    size_t i = 0;
    auto is_hex = [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    };
    auto val = [](char c) -> uint8_t {
        if (c >= '0' && c <= '9') return static_cast<uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<uint8_t>(c - 'a' + 10);
        return static_cast<uint8_t>(c - 'A' + 10);
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (c == '\n' || !is_hex(c)) {
            ++i;
            continue;
        }
        // Start of a hex token. Tokens of length != 2 are offsets; skip them.
        size_t j = i;
        while (j < text.size() && is_hex(text[j])) ++j;
        if (j - i == 2) out.push_back(static_cast<uint8_t>(val(text[i]) << 4 | val(text[i + 1])));
        i = j;
    }
    return out;
}

} // namespace dnslab
