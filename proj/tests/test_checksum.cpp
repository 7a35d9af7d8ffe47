#include <catch2/catch_amalgamated.hpp>

#include "dnslab/checksum.hpp"
#include "dnslab/rng.hpp"

using namespace dnslab;

namespace {

// Independent straight-line RFC 1071 oracle: accumulate 16-bit big-endian
// words into 32 bits, pad odd tails with zero, fold, complement. Kept free of
// any implementation machinery on purpose.
uint16_t oracle_checksum(const std::vector<uint8_t>& data) {
    uint32_t sum = 0;
    size_t i = 0;
    for (; i + 1 < data.size(); i += 2) sum += (uint32_t(data[i]) << 8) | data[i + 1];
    if (i < data.size()) sum += uint32_t(data[i]) << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<uint16_t>(~sum & 0xffff);
}

} // namespace

TEST_CASE("empty input folds to the complement of zero") {
    CHECK(ones_complement_checksum({}) == 0xffff);
}

TEST_CASE("buffer with its own checksum appended verifies to zero") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Bytes buf(rng.uniform(64) * 2, 0);  // even lengths keep the word alignment
        for (auto& b : buf) b = static_cast<uint8_t>(rng.uniform(256));
        uint16_t ck = ones_complement_checksum(buf);
        Bytes with = buf;
        with.push_back(static_cast<uint8_t>(ck >> 8));
        with.push_back(static_cast<uint8_t>(ck & 0xff));
        CHECK(ones_complement_checksum(with) == 0);
    }
}

TEST_CASE("matches the straight-line oracle on random buffers") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        Bytes buf(rng.uniform(512), 0);
        for (auto& b : buf) b = static_cast<uint8_t>(rng.uniform(256));
        std::vector<uint8_t> copy(buf.begin(), buf.end());
        CHECK(ones_complement_checksum(buf) == oracle_checksum(copy));
    }
}

TEST_CASE("accumulator handles arbitrary slice boundaries") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Bytes buf(3 + rng.uniform(200), 0);
        for (auto& b : buf) b = static_cast<uint8_t>(rng.uniform(256));
        size_t cut = rng.uniform(buf.size());
        ChecksumAccumulator acc;
        acc.add(ByteView(buf).subspan(0, cut));
        acc.add(ByteView(buf).subspan(cut));
        CHECK(acc.checksum() == ones_complement_checksum(buf));
    }
}

TEST_CASE("one's-complement subtraction recovers a removed word") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        uint16_t a = static_cast<uint16_t>(rng.uniform(0x10000));
        uint16_t b = static_cast<uint16_t>(rng.uniform(0x10000));
        uint16_t d = ones_complement_sub(a, b);
        // b + d must fold back to a (mod 0xffff).
        uint32_t s = uint32_t(b) + d;
        while (s >> 16) s = (s & 0xffff) + (s >> 16);
        uint32_t want = a == 0xffff ? 0 : a;
        CHECK((s == want || s == (want == 0 ? 0xffff : want)));
    }
}
