#pragma once

#include "dnslab/dns.hpp"
#include "dnslab/fragment.hpp"
#include "dnslab/udp.hpp"

namespace dnslab::testing {

// Genuine-looking authoritative response packet for craft/reassembly tests.
inline Ipv4Packet make_response_packet(const std::string& qname,
                                       std::vector<ResourceRecord> answers, bool with_opt,
                                       uint16_t txid = 0x3131, uint16_t dst_port = 40000,
                                       uint16_t ipid = 4500,
                                       Ipv4Addr src = Ipv4Addr(123, 0, 0, 53),
                                       Ipv4Addr dst = Ipv4Addr(30, 0, 0, 1)) {
    DnsMessage m;
    m.txid = txid;
    m.qr = m.aa = true;
    m.question.push_back(Question{qname, answers.empty() ? RrType::A : answers.front().rrtype,
                                  kClassIn});
    m.answers = std::move(answers);
    if (with_opt) m.additional.push_back(ResourceRecord::opt(4096));
    return make_udp_packet(src, dst, 53, dst_port, m.encode(), ipid);
}

// Independent full-recompute oracle: one's-complement sum over the
// pseudo-header (length taken from the UDP header) and every payload byte.
inline bool oracle_udp_valid(const Ipv4Packet& p) {
    uint32_t sum = 0;
    auto add16 = [&](uint16_t v) { sum += v; };
    add16(static_cast<uint16_t>(p.header.src.value >> 16));
    add16(static_cast<uint16_t>(p.header.src.value & 0xffff));
    add16(static_cast<uint16_t>(p.header.dst.value >> 16));
    add16(static_cast<uint16_t>(p.header.dst.value & 0xffff));
    add16(17);
    if (p.payload.size() < 8) return false;
    add16(static_cast<uint16_t>(p.payload[4] << 8 | p.payload[5]));  // UDP length field
    for (size_t i = 0; i + 1 < p.payload.size(); i += 2)
        add16(static_cast<uint16_t>(p.payload[i] << 8 | p.payload[i + 1]));
    if (p.payload.size() % 2) add16(static_cast<uint16_t>(p.payload.back() << 8));
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return sum == 0xffff;
}

} // namespace dnslab::testing
