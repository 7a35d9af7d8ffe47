#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dnslab/bytes.hpp"
#include "dnslab/error.hpp"
#include "dnslab/ip.hpp"

namespace dnslab {

enum class RrType : uint16_t {
    A = 1,
    NS = 2,
    CNAME = 5,
    TXT = 16,
    MX = 15,
    OPT = 41,
};

inline const char* rrtype_name(RrType t) {
    switch (t) {
        case RrType::A: return "A";
        case RrType::NS: return "NS";
        case RrType::CNAME: return "CNAME";
        case RrType::TXT: return "TXT";
        case RrType::MX: return "MX";
        case RrType::OPT: return "OPT";
    }
    return "?";
}

inline RrType rrtype_from_name(const std::string& s) {
    if (s == "A") return RrType::A;
    if (s == "NS") return RrType::NS;
    if (s == "CNAME") return RrType::CNAME;
    if (s == "TXT") return RrType::TXT;
    if (s == "MX") return RrType::MX;
    if (s == "OPT") return RrType::OPT;
    throw ParseError("unknown rrtype: " + s);
}

enum : uint16_t { kClassIn = 1 };

enum : uint8_t {
    kRcodeNoError = 0,
    kRcodeServFail = 2,
    kRcodeNxDomain = 3,
    kRcodeRefused = 5,
};

// Lower-cases and strips one trailing dot; DNS names compare case-insensitively.
inline std::string canonical_name(std::string n) {
    if (!n.empty() && n.back() == '.') n.pop_back();
    for (char& c : n)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return n;
}

// Wire length of a name is its presentation length (counting a trailing dot) + 1.
inline void encode_name(Bytes& out, const std::string& name) {
    std::string n = canonical_name(name);
    if (n.size() > 253) throw ParseError("domain name > 253 chars: " + n);
    size_t start = 0;
    while (start < n.size()) {
        size_t dot = n.find('.', start);
        size_t end = dot == std::string::npos ? n.size() : dot;
        size_t len = end - start;
        if (len == 0 || len > 63) throw ParseError("bad label in name: " + n);
        put_u8(out, static_cast<uint8_t>(len));
        for (size_t i = start; i < end; ++i) out.push_back(static_cast<uint8_t>(n[i]));
        start = end + 1;
        if (dot == std::string::npos) break;
    }
    put_u8(out, 0);
}

// Decoder accepts compression pointers; the encoder never emits them, so that
// record offsets inside generated responses stay a pure function of content.
inline std::string decode_name(ByteReader& r) {
    std::string out;
    size_t jumps = 0;
    size_t resume = 0;
    bool jumped = false;
    for (;;) {
        uint8_t len = r.u8();
        if ((len & 0xc0) == 0xc0) {
            uint8_t lo = r.u8();
            if (!jumped) resume = r.pos();
            jumped = true;
            if (++jumps > 64) throw ParseError("compression pointer loop");
            r.seek((size_t(len & 0x3f) << 8) | lo);
            continue;
        }
        if (len > 63) throw ParseError("bad label length");
        if (len == 0) break;
        if (!out.empty()) out += '.';
        for (int i = 0; i < len; ++i) out += static_cast<char>(r.u8());
    }
    if (jumped) r.seek(resume);
    return canonical_name(out);
}

struct Question {
    std::string qname;
    RrType qtype = RrType::A;
    uint16_t qclass = kClassIn;

    bool operator==(const Question& o) const {
        return canonical_name(qname) == canonical_name(o.qname) && qtype == o.qtype &&
               qclass == o.qclass;
    }
};

struct MxData {
    uint16_t preference = 0;
    std::string target;
    bool operator==(const MxData&) const = default;
};

struct ResourceRecord {
    std::string name;
    RrType rrtype = RrType::A;
    uint16_t rrclass = kClassIn;  // for OPT this is the advertised UDP size
    uint32_t ttl = 0;
    // A -> Ipv4Addr; NS/CNAME -> target name; MX -> MxData;
    // TXT -> raw character strings; OPT and anything else -> raw rdata.
    std::variant<Ipv4Addr, std::string, MxData, std::vector<std::string>, Bytes> rdata;

    bool operator==(const ResourceRecord& o) const {
        return canonical_name(name) == canonical_name(o.name) && rrtype == o.rrtype &&
               rrclass == o.rrclass && ttl == o.ttl && rdata == o.rdata;
    }

    static ResourceRecord a(std::string name, Ipv4Addr addr, uint32_t ttl = 300) {
        return ResourceRecord{std::move(name), RrType::A, kClassIn, ttl, addr};
    }
    static ResourceRecord mx(std::string name, uint16_t pref, std::string target,
                             uint32_t ttl = 300) {
        return ResourceRecord{std::move(name), RrType::MX, kClassIn, ttl,
                              MxData{pref, std::move(target)}};
    }
    static ResourceRecord ns(std::string name, std::string target, uint32_t ttl = 300) {
        return ResourceRecord{std::move(name), RrType::NS, kClassIn, ttl, std::move(target)};
    }
    static ResourceRecord cname(std::string name, std::string target, uint32_t ttl = 300) {
        return ResourceRecord{std::move(name), RrType::CNAME, kClassIn, ttl, std::move(target)};
    }
    static ResourceRecord txt(std::string name, std::vector<std::string> strings,
                              uint32_t ttl = 300) {
        return ResourceRecord{std::move(name), RrType::TXT, kClassIn, ttl, std::move(strings)};
    }
    static ResourceRecord opt(uint16_t udp_size) {
        return ResourceRecord{"", RrType::OPT, udp_size, 0, Bytes{}};
    }

    std::string rdata_str() const {
        switch (rrtype) {
            case RrType::A: return std::get<Ipv4Addr>(rdata).str();
            case RrType::NS:
            case RrType::CNAME: return std::get<std::string>(rdata);
            case RrType::MX: {
                const auto& mx = std::get<MxData>(rdata);
                return std::to_string(mx.preference) + " " + mx.target;
            }
            case RrType::TXT: {
                std::string out;
                for (const auto& s : std::get<std::vector<std::string>>(rdata)) {
                    if (!out.empty()) out += ' ';
                    out += '"' + s + '"';
                }
                return out;
            }
            case RrType::OPT: return "size=" + std::to_string(rrclass);
        }
        return "";
    }
};

struct DnsMessage {
    uint16_t txid = 0;
    bool qr = false;  // response flag
    bool aa = false;
    bool tc = false;
    bool rd = true;
    bool ra = false;
    uint8_t opcode = 0;
    uint8_t rcode = kRcodeNoError;
    std::vector<Question> question;
    std::vector<ResourceRecord> answers;
    std::vector<ResourceRecord> authority;
    std::vector<ResourceRecord> additional;

    bool operator==(const DnsMessage& o) const {
        return txid == o.txid && qr == o.qr && aa == o.aa && tc == o.tc && rd == o.rd &&
               ra == o.ra && opcode == o.opcode && rcode == o.rcode && question == o.question &&
               answers == o.answers && authority == o.authority && additional == o.additional;
    }

    uint16_t flags_word() const {
        return static_cast<uint16_t>((qr ? 0x8000 : 0) | (uint16_t(opcode & 0xf) << 11) |
                                     (aa ? 0x0400 : 0) | (tc ? 0x0200 : 0) | (rd ? 0x0100 : 0) |
                                     (ra ? 0x0080 : 0) | (rcode & 0xf));
    }

    Bytes encode() const {
        Bytes out;
        put_u16(out, txid);
        put_u16(out, flags_word());
        put_u16(out, static_cast<uint16_t>(question.size()));
        put_u16(out, static_cast<uint16_t>(answers.size()));
        put_u16(out, static_cast<uint16_t>(authority.size()));
        put_u16(out, static_cast<uint16_t>(additional.size()));
        for (const auto& q : question) {
            encode_name(out, q.qname);
            put_u16(out, static_cast<uint16_t>(q.qtype));
            put_u16(out, q.qclass);
        }
        for (const auto& rr : answers) encode_rr(out, rr);
        for (const auto& rr : authority) encode_rr(out, rr);
        for (const auto& rr : additional) encode_rr(out, rr);
        return out;
    }

    static void encode_rr(Bytes& out, const ResourceRecord& rr) {
        encode_name(out, rr.name);
        put_u16(out, static_cast<uint16_t>(rr.rrtype));
        put_u16(out, rr.rrclass);
        put_u32(out, rr.ttl);
        size_t len_at = out.size();
        put_u16(out, 0);
        size_t rd_start = out.size();
        switch (rr.rrtype) {
            case RrType::A:
                put_u32(out, std::get<Ipv4Addr>(rr.rdata).value);
                break;
            case RrType::NS:
            case RrType::CNAME:
                encode_name(out, std::get<std::string>(rr.rdata));
                break;
            case RrType::MX: {
                const auto& mx = std::get<MxData>(rr.rdata);
                put_u16(out, mx.preference);
                encode_name(out, mx.target);
                break;
            }
            case RrType::TXT:
                for (const auto& s : std::get<std::vector<std::string>>(rr.rdata)) {
                    if (s.size() > 255) throw ParseError("TXT string > 255");
                    put_u8(out, static_cast<uint8_t>(s.size()));
                    out.insert(out.end(), s.begin(), s.end());
                }
                break;
            case RrType::OPT: {
                const auto& raw = std::get<Bytes>(rr.rdata);
                out.insert(out.end(), raw.begin(), raw.end());
                break;
            }
        }
        set_u16(out, len_at, static_cast<uint16_t>(out.size() - rd_start));
    }

    static ResourceRecord decode_rr(ByteReader& r) {
        ResourceRecord rr;
        rr.name = decode_name(r);
        rr.rrtype = static_cast<RrType>(r.u16());
        rr.rrclass = r.u16();
        rr.ttl = r.u32();
        uint16_t rdlen = r.u16();
        size_t end = r.pos() + rdlen;
        switch (rr.rrtype) {
            case RrType::A:
                if (rdlen != 4) throw ParseError("A rdata must be 4 bytes");
                rr.rdata = Ipv4Addr(r.u32());
                break;
            case RrType::NS:
            case RrType::CNAME:
                rr.rdata = decode_name(r);
                break;
            case RrType::MX: {
                MxData mx;
                mx.preference = r.u16();
                mx.target = decode_name(r);
                rr.rdata = mx;
                break;
            }
            case RrType::TXT: {
                std::vector<std::string> strings;
                while (r.pos() < end) {
                    uint8_t n = r.u8();
                    Bytes raw = r.take(n);
                    strings.emplace_back(raw.begin(), raw.end());
                }
                rr.rdata = strings;
                break;
            }
            default:
                rr.rdata = r.take(rdlen);
                break;
        }
        if (r.pos() != end) throw ParseError("rdata length mismatch");
        return rr;
    }

    // Trailing bytes past the counted sections are ignored, matching
    // receivers that checksum the full datagram but parse by section counts.
    static DnsMessage decode(ByteView wire) {
        ByteReader r(wire);
        DnsMessage m;
        m.txid = r.u16();
        uint16_t flags = r.u16();
        m.qr = (flags & 0x8000) != 0;
        m.opcode = static_cast<uint8_t>((flags >> 11) & 0xf);
        m.aa = (flags & 0x0400) != 0;
        m.tc = (flags & 0x0200) != 0;
        m.rd = (flags & 0x0100) != 0;
        m.ra = (flags & 0x0080) != 0;
        m.rcode = static_cast<uint8_t>(flags & 0xf);
        uint16_t qd = r.u16(), an = r.u16(), ns = r.u16(), ar = r.u16();
        for (int i = 0; i < qd; ++i) {
            Question q;
            q.qname = decode_name(r);
            q.qtype = static_cast<RrType>(r.u16());
            q.qclass = r.u16();
            m.question.push_back(q);
        }
        for (int i = 0; i < an; ++i) m.answers.push_back(decode_rr(r));
        for (int i = 0; i < ns; ++i) m.authority.push_back(decode_rr(r));
        for (int i = 0; i < ar; ++i) m.additional.push_back(decode_rr(r));
        return m;
    }

    // Byte offset where the answer section starts in the encoded message.
    size_t answer_section_offset() const {
        size_t off = 12;
        for (const auto& q : question) off += canonical_name(q.qname).size() + 2 + 4;
        return off;
    }

    // Wire encoding of the answer section alone; response identity for the
    // predictability measurement is exact byte equality of this slice.
    Bytes answer_section_bytes() const {
        Bytes out;
        for (const auto& rr : answers) encode_rr(out, rr);
        return out;
    }
};

inline DnsMessage make_query(uint16_t txid, const std::string& qname, RrType qtype,
                             uint16_t edns_size = 0) {
    DnsMessage m;
    m.txid = txid;
    m.rd = true;
    m.question.push_back(Question{canonical_name(qname), qtype, kClassIn});
    if (edns_size > 0) m.additional.push_back(ResourceRecord::opt(edns_size));
    return m;
}

} // namespace dnslab
