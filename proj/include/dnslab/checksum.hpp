#pragma once

#include <cstdint>

#include "dnslab/bytes.hpp"

namespace dnslab {

// RFC 1071 one's-complement arithmetic. The accumulator keeps byte-position
// parity so that data can be fed in slices that do not end on 16-bit
// boundaries (fragments cut at arbitrary 8-byte offsets).
class ChecksumAccumulator {
public:
    void add(ByteView data) {
        for (uint8_t b : data) add_byte(b);
    }
    void add_byte(uint8_t b) {
        if (high_) {
            sum_ += static_cast<uint32_t>(b) << 8;
        } else {
            sum_ += b;
        }
        high_ = !high_;
    }
    void add_u16(uint16_t v) {
        add_byte(static_cast<uint8_t>(v >> 8));
        add_byte(static_cast<uint8_t>(v & 0xff));
    }

    // Folded one's-complement sum (odd trailing byte padded with zero).
    uint16_t fold() const {
        uint64_t s = sum_;
        while (s >> 16) s = (s & 0xffff) + (s >> 16);
        return static_cast<uint16_t>(s);
    }

    uint16_t checksum() const { return static_cast<uint16_t>(~fold()); }

private:
    uint64_t sum_ = 0;
    bool high_ = true;  // next byte is the high octet of a 16-bit word
};

// Checksum of a flat buffer; empty input gives 0xffff (complement of zero).
inline uint16_t ones_complement_checksum(ByteView data) {
    ChecksumAccumulator acc;
    acc.add(data);
    return acc.checksum();
}

// One's-complement sum of a buffer (not complemented).
inline uint16_t ones_complement_sum(ByteView data) {
    ChecksumAccumulator acc;
    acc.add(data);
    return acc.fold();
}

// a - b in one's-complement arithmetic (mod 0xffff), result in [0, 0xfffe].
inline uint16_t ones_complement_sub(uint16_t a, uint16_t b) {
    uint32_t s = static_cast<uint32_t>(a) + 0xffffu - b;
    while (s >> 16) s = (s & 0xffff) + (s >> 16);
    // 0xffff and 0 are the same residue; normalise to 0 so that "no
    // adjustment needed" yields literal zero bytes.
    return s == 0xffff ? 0 : static_cast<uint16_t>(s);
}

} // namespace dnslab
