#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "dnslab/frag_craft.hpp"
#include "dnslab/icmp.hpp"
#include "dnslab/udp.hpp"

using namespace dnslab;

namespace {

Bytes load_vector(const std::string& name) {
    std::ifstream in(std::string(DNSLAB_SOURCE_DIR) + "/tests/vectors/" + name);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_hex_dump(ss.str());
}

} // namespace

TEST_CASE("hex fixtures decode and re-encode byte-identically") {
    for (const char* name : {"dns_query.hex", "response68_frag1.hex", "response68_frag2.hex",
                             "response96_frag1.hex", "response96_frag2.hex",
                             "spoofed_frag2.hex", "icmp_ptb.hex"}) {
        Bytes wire = load_vector(name);
        Ipv4Packet p = Ipv4Packet::decode(wire);
        CHECK(p.encode() == wire);
    }
}

TEST_CASE("query fixture fields") {
    Ipv4Packet p = Ipv4Packet::decode(load_vector("dns_query.hex"));
    CHECK(p.header.src == Ipv4Addr::parse("30.0.0.1"));
    CHECK(p.header.dst == Ipv4Addr::parse("123.0.0.53"));
    CHECK(verify_udp_checksum(p));
    DnsMessage q = DnsMessage::decode(udp_payload_view(p));
    CHECK(q.txid == 0x1a2b);
    CHECK_FALSE(q.qr);
    CHECK(q.question.at(0).qname == "maila.victim-corp.test");
    CHECK(q.question.at(0).qtype == RrType::A);
}

TEST_CASE("68-byte first fragment matches the boundary arithmetic") {
    Bytes wire = load_vector("response68_frag1.hex");
    REQUIRE(wire.size() == 68);
    Ipv4Packet frag1 = Ipv4Packet::decode(wire);
    CHECK(frag1.header.mf_flag);
    CHECK(frag1.header.fragment_offset == 0);
    CHECK(frag1.payload.size() == 48);  // 8 UDP + 12 header + 24 QNAME + 4

    Ipv4Packet frag2 = Ipv4Packet::decode(load_vector("response68_frag2.hex"));
    CHECK_FALSE(frag2.header.mf_flag);
    CHECK(frag2.header.fragment_offset == 6);
    CHECK(frag2.header.ipid == frag1.header.ipid);

    ReassemblyCache cache;
    cache.insert(frag2, 0.0);
    auto res = cache.insert(frag1, 0.5);
    REQUIRE(res.packet.has_value());
    CHECK(verify_udp_checksum(*res.packet));
    DnsMessage m = DnsMessage::decode(udp_payload_view(*res.packet));
    REQUIRE(m.answers.size() == 1);
    CHECK(std::get<Ipv4Addr>(m.answers[0].rdata) == Ipv4Addr(1, 2, 3, 4));
    // The answer section begins exactly at the fragment boundary.
    CHECK(8 + m.answer_section_offset() == frag1.payload.size());
}

TEST_CASE("spoofed fragment fixture reassembles with the genuine first fragment") {
    Ipv4Packet frag1 = Ipv4Packet::decode(load_vector("response96_frag1.hex"));
    Ipv4Packet genuine2 = Ipv4Packet::decode(load_vector("response96_frag2.hex"));
    Ipv4Packet spoof = Ipv4Packet::decode(load_vector("spoofed_frag2.hex"));
    CHECK(spoof.header.fragment_offset == genuine2.header.fragment_offset);
    CHECK_FALSE(spoof.header.mf_flag);

    // The crafted fixture equals a fresh craft from the genuine pair.
    Ipv4Packet recrafted = craft_spoofed_second_fragment(
        frag1, genuine2, {ResourceRecord::a("maila.victim-corp.test", Ipv4Addr(6, 6, 6, 6))},
        spoof.header.ipid);
    CHECK(recrafted.encode() == spoof.encode());

    ReassemblyCache cache;
    cache.insert(spoof, 0.0);
    auto res = cache.insert(frag1, 1.0);
    REQUIRE(res.packet.has_value());
    REQUIRE(verify_udp_checksum(*res.packet));
    DnsMessage m = DnsMessage::decode(udp_payload_view(*res.packet));
    CHECK(std::get<Ipv4Addr>(m.answers.at(0).rdata) == Ipv4Addr(6, 6, 6, 6));
}

TEST_CASE("icmp fixture carries the fragmentation-needed semantics") {
    Ipv4Packet p = Ipv4Packet::decode(load_vector("icmp_ptb.hex"));
    CHECK(p.header.protocol == kProtoIcmp);
    IcmpMessage icmp = IcmpMessage::decode(p.payload);
    CHECK(icmp.icmp_type == kIcmpDestUnreachable);
    CHECK(icmp.code == kIcmpCodeFragNeeded);
    CHECK(icmp.next_hop_mtu == 296);
    Ipv4Header quoted = icmp.embedded_header();
    CHECK(quoted.src == Ipv4Addr::parse("123.0.0.53"));
    CHECK(quoted.dst == Ipv4Addr::parse("30.0.0.1"));
    CHECK(icmp.embedded.size() == 28);  // header + exactly 8 payload bytes
}
