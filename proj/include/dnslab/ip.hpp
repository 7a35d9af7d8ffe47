#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "dnslab/bytes.hpp"
#include "dnslab/checksum.hpp"
#include "dnslab/error.hpp"

namespace dnslab {

// IPv4 address as a host-order integer with dotted-quad formatting.
struct Ipv4Addr {
    uint32_t value = 0;

    constexpr Ipv4Addr() = default;
    constexpr explicit Ipv4Addr(uint32_t v) : value(v) {}
    constexpr Ipv4Addr(uint8_t a, uint8_t b, uint8_t c, uint8_t d)
        : value((uint32_t(a) << 24) | (uint32_t(b) << 16) | (uint32_t(c) << 8) | d) {}

    auto operator<=>(const Ipv4Addr&) const = default;

    std::string str() const {
        return std::to_string(value >> 24) + "." + std::to_string((value >> 16) & 0xff) + "." +
               std::to_string((value >> 8) & 0xff) + "." + std::to_string(value & 0xff);
    }

    static Ipv4Addr parse(const std::string& s) {
        uint32_t parts[4] = {0, 0, 0, 0};
        size_t i = 0;
        int p = 0;
        bool any = false;
        for (; i <= s.size(); ++i) {
            if (i == s.size() || s[i] == '.') {
                if (!any || p > 3) throw ParseError("bad IPv4 address: " + s);
                if (i < s.size()) {
                    ++p;
                    any = false;
                }
                continue;
            }
            if (s[i] < '0' || s[i] > '9') throw ParseError("bad IPv4 address: " + s);
            parts[p] = parts[p] * 10 + static_cast<uint32_t>(s[i] - '0');
            if (parts[p] > 255) throw ParseError("bad IPv4 address: " + s);
            any = true;
        }
        if (p != 3) throw ParseError("bad IPv4 address: " + s);
        return Ipv4Addr(static_cast<uint8_t>(parts[0]), static_cast<uint8_t>(parts[1]),
                        static_cast<uint8_t>(parts[2]), static_cast<uint8_t>(parts[3]));
    }
};

// CIDR prefix; the base address has no host bits set.
struct Prefix {
    Ipv4Addr base;
    uint8_t length = 0;  // 0..32

    static uint32_t mask_of(uint8_t len) {
        return len == 0 ? 0 : (len >= 32 ? 0xffffffffu : ~((1u << (32 - len)) - 1));
    }

    bool contains(Ipv4Addr ip) const {
        uint32_t m = mask_of(length);
        return (ip.value & m) == (base.value & m);
    }

    std::string str() const { return base.str() + "/" + std::to_string(length); }

    static Prefix make(Ipv4Addr ip, uint8_t len) {
        if (len > 32) throw ParseError("prefix length > 32");
        return Prefix{Ipv4Addr(ip.value & mask_of(len)), len};
    }

    static Prefix parse(const std::string& s) {
        auto slash = s.find('/');
        if (slash == std::string::npos) throw ParseError("prefix needs /len: " + s);
        Ipv4Addr base = Ipv4Addr::parse(s.substr(0, slash));
        int len = std::stoi(s.substr(slash + 1));
        if (len < 0 || len > 32) throw ParseError("bad prefix length: " + s);
        Prefix p = make(base, static_cast<uint8_t>(len));
        if (p.base != base) throw ParseError("prefix has host bits set: " + s);
        return p;
    }

    auto operator<=>(const Prefix&) const = default;
};

enum : uint8_t {
    kProtoIcmp = 1,
    kProtoUdp = 17,
};

// 20-byte header, no options (ihl always 5 when generated).
struct Ipv4Header {
    uint8_t ihl = 5;           // 32-bit words
    uint16_t total_length = 0; // bytes, set by encode
    uint16_t ipid = 0;
    bool df_flag = false;
    bool mf_flag = false;
    uint16_t fragment_offset = 0;  // 8-byte units
    uint8_t ttl = 64;
    uint8_t protocol = kProtoUdp;
    uint16_t header_checksum = 0;  // set by encode
    Ipv4Addr src;
    Ipv4Addr dst;

    size_t header_len() const { return size_t(ihl) * 4; }
};

struct Ipv4Packet {
    Ipv4Header header;
    Bytes payload;

    size_t total_length() const { return header.header_len() + payload.size(); }
    bool is_fragment() const { return header.mf_flag || header.fragment_offset != 0; }

    Bytes encode() const {
        if (header.ihl < 5) throw ParseError("ihl < 5");
        size_t total = total_length();
        if (total > 65535) throw ParseError("packet exceeds 65535 bytes");
        if (size_t(header.fragment_offset) * 8 + payload.size() > 65535)
            throw ParseError("fragment extends past 65535");
        Bytes out;
        out.reserve(total);
        put_u8(out, static_cast<uint8_t>(0x40 | header.ihl));
        put_u8(out, 0);  // TOS
        put_u16(out, static_cast<uint16_t>(total));
        put_u16(out, header.ipid);
        uint16_t ff = static_cast<uint16_t>((header.df_flag ? 0x4000 : 0) |
                                            (header.mf_flag ? 0x2000 : 0) |
                                            (header.fragment_offset & 0x1fff));
        put_u16(out, ff);
        put_u8(out, header.ttl);
        put_u8(out, header.protocol);
        put_u16(out, 0);  // checksum placeholder
        put_u32(out, header.src.value);
        put_u32(out, header.dst.value);
        uint16_t ck = ones_complement_checksum(ByteView(out).subspan(0, 20));
        set_u16(out, 10, ck);
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }

    static Ipv4Packet decode(ByteView wire) {
        ByteReader r(wire);
        uint8_t vi = r.u8();
        if ((vi >> 4) != 4) throw ParseError("not IPv4");
        Ipv4Header h;
        h.ihl = vi & 0xf;
        if (h.ihl < 5) throw ParseError("ihl < 5");
        r.u8();  // TOS
        h.total_length = r.u16();
        h.ipid = r.u16();
        uint16_t ff = r.u16();
        h.df_flag = (ff & 0x4000) != 0;
        h.mf_flag = (ff & 0x2000) != 0;
        h.fragment_offset = ff & 0x1fff;
        h.ttl = r.u8();
        h.protocol = r.u8();
        h.header_checksum = r.u16();
        h.src = Ipv4Addr(r.u32());
        h.dst = Ipv4Addr(r.u32());
        if (size_t(h.ihl) * 4 > 20) r.take(size_t(h.ihl) * 4 - 20);  // options, kept opaque
        if (ones_complement_checksum(wire.subspan(0, size_t(h.ihl) * 4)) != 0)
            throw ParseError("IP header checksum mismatch");
        if (h.total_length < h.header_len() || h.total_length > wire.size())
            throw ParseError("bad IP total length");
        Ipv4Packet p;
        p.header = h;
        p.payload = r.take(h.total_length - h.header_len());
        return p;
    }
};

// Same fragment, different IPID (header checksum follows on encode).
inline Ipv4Packet with_ipid(Ipv4Packet p, uint16_t ipid) {
    p.header.ipid = ipid;
    return p;
}

} // namespace dnslab
