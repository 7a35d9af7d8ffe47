#pragma once

#include <cstdint>

#include "dnslab/bytes.hpp"
#include "dnslab/checksum.hpp"
#include "dnslab/error.hpp"
#include "dnslab/ip.hpp"

namespace dnslab {

enum : uint8_t {
    kIcmpDestUnreachable = 3,
    kIcmpCodePortUnreachable = 3,
    kIcmpCodeFragNeeded = 4,
};

// Destination-unreachable message. The quoted original is exactly the
// offending packet's IP header plus its first 8 payload bytes.
struct IcmpMessage {
    uint8_t icmp_type = kIcmpDestUnreachable;
    uint8_t code = 0;
    uint16_t next_hop_mtu = 0;  // code 4 only
    Bytes embedded;             // original IP header + 8 bytes

    Bytes encode() const {
        Bytes out;
        put_u8(out, icmp_type);
        put_u8(out, code);
        put_u16(out, 0);  // checksum placeholder
        put_u16(out, 0);  // unused
        put_u16(out, code == kIcmpCodeFragNeeded ? next_hop_mtu : 0);
        out.insert(out.end(), embedded.begin(), embedded.end());
        uint16_t ck = ones_complement_checksum(out);
        set_u16(out, 2, ck);
        return out;
    }

    static IcmpMessage decode(ByteView wire) {
        if (ones_complement_checksum(wire) != 0) throw ParseError("ICMP checksum mismatch");
        ByteReader r(wire);
        IcmpMessage m;
        m.icmp_type = r.u8();
        m.code = r.u8();
        r.u16();  // checksum
        r.u16();  // unused
        m.next_hop_mtu = r.u16();
        m.embedded = r.take(r.remaining());
        return m;
    }

    // Header of the quoted original packet.
    Ipv4Header embedded_header() const {
        Ipv4Packet quoted;
        // The quote is header + 8 bytes, shorter than total_length claims;
        // parse the header fields directly.
        ByteReader r(embedded);
        uint8_t vi = r.u8();
        Ipv4Header h;
        h.ihl = vi & 0xf;
        r.u8();
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
        return h;
    }
};

// Fragmentation-needed error (type 3, code 4) quoting `original`.
inline IcmpMessage make_ptb(const Ipv4Packet& original, uint16_t mtu) {
    IcmpMessage m;
    m.icmp_type = kIcmpDestUnreachable;
    m.code = kIcmpCodeFragNeeded;
    m.next_hop_mtu = mtu;
    Bytes hdr = original.encode();
    size_t quote = original.header.header_len() + std::min<size_t>(8, original.payload.size());
    m.embedded.assign(hdr.begin(), hdr.begin() + quote);
    return m;
}

inline IcmpMessage make_port_unreachable(const Ipv4Packet& offender) {
    IcmpMessage m;
    m.icmp_type = kIcmpDestUnreachable;
    m.code = kIcmpCodePortUnreachable;
    Bytes hdr = offender.encode();
    size_t quote = offender.header.header_len() + std::min<size_t>(8, offender.payload.size());
    m.embedded.assign(hdr.begin(), hdr.begin() + quote);
    return m;
}

inline Ipv4Packet make_icmp_packet(Ipv4Addr src, Ipv4Addr dst, const IcmpMessage& m,
                                   uint16_t ipid = 0) {
    Ipv4Packet p;
    p.header.protocol = kProtoIcmp;
    p.header.src = src;
    p.header.dst = dst;
    p.header.ipid = ipid;
    p.payload = m.encode();
    return p;
}

} // namespace dnslab
