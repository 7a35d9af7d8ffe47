#include <catch2/catch_amalgamated.hpp>

#include "dnslab/dns.hpp"
#include "dnslab/icmp.hpp"
#include "dnslab/ip.hpp"
#include "dnslab/rng.hpp"
#include "dnslab/udp.hpp"

using namespace dnslab;

TEST_CASE("ipv4 header round trip and checksum") {
    Ipv4Packet p;
    p.header.src = Ipv4Addr::parse("123.0.0.53");
    p.header.dst = Ipv4Addr::parse("30.0.0.1");
    p.header.ipid = 0xabcd;
    p.header.ttl = 61;
    p.payload = {1, 2, 3, 4, 5};
    Bytes wire = p.encode();
    REQUIRE(wire.size() == 25);
    CHECK(ones_complement_checksum(ByteView(wire).subspan(0, 20)) == 0);

    Ipv4Packet q = Ipv4Packet::decode(wire);
    CHECK(q.header.src == p.header.src);
    CHECK(q.header.dst == p.header.dst);
    CHECK(q.header.ipid == 0xabcd);
    CHECK(q.header.ttl == 61);
    CHECK(q.payload == p.payload);

    wire[11] ^= 0x40;  // corrupt the checksum
    CHECK_THROWS_AS(Ipv4Packet::decode(wire), ParseError);
}

TEST_CASE("fragment flag encoding") {
    Ipv4Packet p;
    p.header.src = Ipv4Addr(1, 2, 3, 4);
    p.header.dst = Ipv4Addr(5, 6, 7, 8);
    p.header.mf_flag = true;
    p.header.fragment_offset = 6;  // 48 bytes
    p.payload = Bytes(16, 0xee);
    Ipv4Packet q = Ipv4Packet::decode(p.encode());
    CHECK(q.header.mf_flag);
    CHECK_FALSE(q.header.df_flag);
    CHECK(q.header.fragment_offset == 6);
    CHECK(q.is_fragment());
}

TEST_CASE("udp checksum verifies and rejects tampering") {
    Ipv4Addr src = Ipv4Addr::parse("123.0.0.53");
    Ipv4Addr dst = Ipv4Addr::parse("30.0.0.1");
    Bytes payload = {0xde, 0xad, 0xbe, 0xef, 0x01};
    Ipv4Packet p = make_udp_packet(src, dst, 53, 4242, payload, 77);
    CHECK(verify_udp_checksum(p));

    Ipv4Packet bad = p;
    bad.payload[9] ^= 0x01;
    CHECK_FALSE(verify_udp_checksum(bad));

    auto ports = peek_udp_ports(p);
    CHECK(ports.src_port == 53);
    CHECK(ports.dst_port == 4242);
}

TEST_CASE("dns message round trips through the wire") {
    DnsMessage m;
    m.txid = 0x1234;
    m.qr = true;
    m.aa = true;
    m.question.push_back(Question{"example.info", RrType::MX, kClassIn});
    m.answers.push_back(ResourceRecord::mx("example.info", 10, "mail.example.info"));
    m.additional.push_back(ResourceRecord::a("mail.example.info", Ipv4Addr(1, 2, 3, 4)));
    m.additional.push_back(ResourceRecord::opt(4096));

    DnsMessage d = DnsMessage::decode(m.encode());
    CHECK(d == m);
}

TEST_CASE("decode(encode(m)) = m over generated messages") {
    Rng rng(99);
    const char* names[] = {"example.info", "mail.example.info", "ns1.example.info",
                           "a.b.example.info", "x.test"};
    for (int trial = 0; trial < 300; ++trial) {
        DnsMessage m;
        m.txid = rng.uniform_u16();
        m.qr = rng.bernoulli(0.5);
        m.aa = rng.bernoulli(0.5);
        m.rd = rng.bernoulli(0.5);
        m.ra = rng.bernoulli(0.5);
        m.rcode = static_cast<uint8_t>(rng.uniform(6));
        m.question.push_back(Question{names[rng.uniform(5)],
                                      rng.bernoulli(0.5) ? RrType::MX : RrType::A, kClassIn});
        size_t n = rng.uniform(4);
        for (size_t i = 0; i < n; ++i) {
            switch (rng.uniform(5)) {
                case 0:
                    m.answers.push_back(ResourceRecord::a(
                        names[rng.uniform(5)], Ipv4Addr(uint32_t(rng.next_u64())),
                        uint32_t(rng.uniform(86400))));
                    break;
                case 1:
                    m.answers.push_back(ResourceRecord::mx(
                        names[rng.uniform(5)], rng.uniform_u16(), names[rng.uniform(5)]));
                    break;
                case 2:
                    m.answers.push_back(
                        ResourceRecord::cname(names[rng.uniform(5)], names[rng.uniform(5)]));
                    break;
                case 3:
                    m.answers.push_back(
                        ResourceRecord::ns(names[rng.uniform(5)], names[rng.uniform(5)]));
                    break;
                case 4:
                    m.answers.push_back(ResourceRecord::txt(
                        names[rng.uniform(5)],
                        {std::string(rng.uniform(40), 'p'), std::string(rng.uniform(10), 'q')}));
                    break;
            }
        }
        if (rng.bernoulli(0.5)) m.additional.push_back(ResourceRecord::opt(4096));
        DnsMessage d = DnsMessage::decode(m.encode());
        CHECK(d == m);
    }
}

TEST_CASE("decoder accepts compression pointers") {
    // Hand-built response: question example.info MX, answer name compressed
    // via a pointer to offset 12 (the question name).
    Bytes wire;
    put_u16(wire, 0x0102);          // txid
    put_u16(wire, 0x8400);          // QR + AA
    put_u16(wire, 1);               // qdcount
    put_u16(wire, 1);               // ancount
    put_u16(wire, 0);
    put_u16(wire, 0);
    encode_name(wire, "example.info");
    put_u16(wire, uint16_t(RrType::MX));
    put_u16(wire, kClassIn);
    wire.push_back(0xc0);           // pointer to offset 12
    wire.push_back(12);
    put_u16(wire, uint16_t(RrType::MX));
    put_u16(wire, kClassIn);
    put_u32(wire, 300);
    size_t rdlen_at = wire.size();
    put_u16(wire, 0);
    size_t rd_start = wire.size();
    put_u16(wire, 10);
    wire.push_back(4);
    for (char c : std::string("mail")) wire.push_back(uint8_t(c));
    wire.push_back(0xc0);
    wire.push_back(12);
    set_u16(wire, rdlen_at, uint16_t(wire.size() - rd_start));

    DnsMessage m = DnsMessage::decode(wire);
    REQUIRE(m.answers.size() == 1);
    CHECK(m.answers[0].name == "example.info");
    const auto& mx = std::get<MxData>(m.answers[0].rdata);
    CHECK(mx.preference == 10);
    CHECK(mx.target == "mail.example.info");
}

TEST_CASE("qname wire length is presentation length plus one") {
    Bytes out;
    encode_name(out, "mail.example.info");
    // 17 characters + trailing-dot convention -> 18, wire adds the root byte.
    CHECK(out.size() == 19);
}

TEST_CASE("name over 253 characters is rejected") {
    std::string label(63, 'a');
    std::string big = label + "." + label + "." + label + "." + label;  // 255 chars
    Bytes out;
    CHECK_THROWS_AS(encode_name(out, big), ParseError);
}

TEST_CASE("icmp ptb round trip carries mtu and quote") {
    Ipv4Packet orig = make_udp_packet(Ipv4Addr(123, 0, 0, 53), Ipv4Addr(30, 0, 0, 1), 53, 999,
                                      Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 5);
    IcmpMessage ptb = make_ptb(orig, 296);
    REQUIRE(ptb.embedded.size() == 28);  // 20 header + 8 payload bytes

    IcmpMessage d = IcmpMessage::decode(ptb.encode());
    CHECK(d.icmp_type == kIcmpDestUnreachable);
    CHECK(d.code == kIcmpCodeFragNeeded);
    CHECK(d.next_hop_mtu == 296);
    Ipv4Header h = d.embedded_header();
    CHECK(h.src == orig.header.src);
    CHECK(h.dst == orig.header.dst);
    CHECK(h.protocol == kProtoUdp);
}

TEST_CASE("prefix parse and containment") {
    Prefix p = Prefix::parse("205.251.192.0/18");
    CHECK(p.contains(Ipv4Addr::parse("205.251.200.1")));
    CHECK_FALSE(p.contains(Ipv4Addr::parse("205.252.0.1")));
    CHECK_THROWS_AS(Prefix::parse("205.251.192.1/18"), ParseError);  // host bits
    CHECK(Prefix::parse("0.0.0.0/0").contains(Ipv4Addr::parse("8.8.8.8")));
}
