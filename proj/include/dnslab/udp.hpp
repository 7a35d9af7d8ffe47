#pragma once

#include <cstdint>

#include "dnslab/bytes.hpp"
#include "dnslab/checksum.hpp"
#include "dnslab/error.hpp"
#include "dnslab/ip.hpp"

namespace dnslab {

struct UdpDatagram {
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint16_t length = 0;    // 8 + payload size, set by encode
    uint16_t checksum = 0;  // set by checksummed encode
    Bytes payload;

    Bytes encode_raw() const {
        Bytes out;
        out.reserve(8 + payload.size());
        put_u16(out, src_port);
        put_u16(out, dst_port);
        put_u16(out, length);
        put_u16(out, checksum);
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }

    static UdpDatagram decode(ByteView wire) {
        ByteReader r(wire);
        UdpDatagram d;
        d.src_port = r.u16();
        d.dst_port = r.u16();
        d.length = r.u16();
        d.checksum = r.u16();
        d.payload = r.take(r.remaining());
        return d;
    }
};

namespace detail {
inline void add_pseudo_header(ChecksumAccumulator& acc, Ipv4Addr src, Ipv4Addr dst,
                              uint16_t udp_length) {
    acc.add_u16(static_cast<uint16_t>(src.value >> 16));
    acc.add_u16(static_cast<uint16_t>(src.value & 0xffff));
    acc.add_u16(static_cast<uint16_t>(dst.value >> 16));
    acc.add_u16(static_cast<uint16_t>(dst.value & 0xffff));
    acc.add_u16(kProtoUdp);
    acc.add_u16(udp_length);
}
} // namespace detail

// RFC 768 checksum over pseudo-header + UDP header + payload.
// A computed value of 0 is transmitted as 0xffff.
inline uint16_t compute_udp_checksum(Ipv4Addr src, Ipv4Addr dst, uint16_t src_port,
                                     uint16_t dst_port, ByteView payload) {
    uint16_t udp_len = static_cast<uint16_t>(8 + payload.size());
    ChecksumAccumulator acc;
    detail::add_pseudo_header(acc, src, dst, udp_len);
    acc.add_u16(src_port);
    acc.add_u16(dst_port);
    acc.add_u16(udp_len);
    acc.add_u16(0);
    acc.add(payload);
    uint16_t ck = acc.checksum();
    return ck == 0 ? 0xffff : ck;
}

// Full UDP-in-IP packet with both checksums filled in.
inline Ipv4Packet make_udp_packet(Ipv4Addr src, Ipv4Addr dst, uint16_t src_port,
                                  uint16_t dst_port, ByteView payload, uint16_t ipid,
                                  uint8_t ttl = 64, bool df = false) {
    UdpDatagram d;
    d.src_port = src_port;
    d.dst_port = dst_port;
    d.length = static_cast<uint16_t>(8 + payload.size());
    d.checksum = compute_udp_checksum(src, dst, src_port, dst_port, payload);
    d.payload.assign(payload.begin(), payload.end());

    Ipv4Packet p;
    p.header.protocol = kProtoUdp;
    p.header.src = src;
    p.header.dst = dst;
    p.header.ipid = ipid;
    p.header.ttl = ttl;
    p.header.df_flag = df;
    p.payload = d.encode_raw();
    return p;
}

// Validity check on a reassembled (or never-fragmented) UDP packet. The sum
// runs over the pseudo-header and every carried payload byte, with the length
// fields taken from the UDP header. Bytes carried beyond the header-declared
// length therefore still participate, which is what permits a receiver to
// accept a datagram whose DNS layer ignores trailing padding. A stored
// checksum of zero ("no checksum") is not honoured here; resolvers in this
// model always verify.
inline bool verify_udp_checksum(const Ipv4Packet& p) {
    if (p.header.protocol != kProtoUdp || p.is_fragment()) return false;
    if (p.payload.size() < 8) return false;
    uint16_t udp_len = static_cast<uint16_t>(p.payload[4] << 8 | p.payload[5]);
    uint16_t stored = static_cast<uint16_t>(p.payload[6] << 8 | p.payload[7]);
    if (stored == 0) return false;
    ChecksumAccumulator acc;
    detail::add_pseudo_header(acc, p.header.src, p.header.dst, udp_len);
    acc.add(p.payload);
    return acc.fold() == 0xffff;
}

// Header fields of the UDP header carried in an unfragmented packet or a
// first fragment. Throws on short payloads.
struct UdpPorts {
    uint16_t src_port;
    uint16_t dst_port;
};
inline UdpPorts peek_udp_ports(const Ipv4Packet& p) {
    if (p.payload.size() < 8 || p.header.fragment_offset != 0)
        throw ParseError("no UDP header in this fragment");
    return UdpPorts{static_cast<uint16_t>(p.payload[0] << 8 | p.payload[1]),
                    static_cast<uint16_t>(p.payload[2] << 8 | p.payload[3])};
}

inline ByteView udp_payload_view(const Ipv4Packet& p) {
    if (p.payload.size() < 8) throw ParseError("UDP packet too short");
    return ByteView(p.payload).subspan(8);
}

} // namespace dnslab
