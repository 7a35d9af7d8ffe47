#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "dnslab/error.hpp"
#include "dnslab/ip.hpp"

namespace dnslab {

inline constexpr uint16_t kMinMtu = 68;  // RFC 791 minimum

// Splits a packet into fragments of at most `mtu` bytes each. Non-final
// fragment payloads are multiples of 8 bytes; IPID, addresses, protocol and
// TTL are copied, so only the first fragment carries the UDP header. A packet
// that already fits is returned unchanged.
inline std::vector<Ipv4Packet> fragment(const Ipv4Packet& packet, uint16_t mtu) {
    if (mtu < kMinMtu) throw MtuTooSmall("mtu " + std::to_string(mtu) + " < 68");
    if (packet.total_length() <= mtu) return {packet};
    if (packet.header.df_flag) throw DfSet("DF set on packet larger than mtu");

    size_t hdr = packet.header.header_len();
    size_t chunk = ((mtu - hdr) / 8) * 8;
    std::vector<Ipv4Packet> out;
    size_t off = 0;
    while (off < packet.payload.size()) {
        size_t len = std::min(chunk, packet.payload.size() - off);
        Ipv4Packet f;
        f.header = packet.header;
        f.header.fragment_offset = static_cast<uint16_t>(packet.header.fragment_offset + off / 8);
        f.header.mf_flag = (off + len < packet.payload.size()) || packet.header.mf_flag;
        f.payload.assign(packet.payload.begin() + static_cast<long>(off),
                         packet.payload.begin() + static_cast<long>(off + len));
        out.push_back(std::move(f));
        off += len;
    }
    return out;
}

// Receiver-side defragmentation cache. Fragments of one original packet share
// the (src, dst, protocol, ipid) key. Policy choices that matter to the rest
// of the model:
//   - capacity counts fragments across all entries (default 64); exceeding it
//     evicts the entry with the oldest fragment and reports the eviction
//   - fragments older than `timeout` never match and are pruned lazily
//   - overlaps are first-wins: bytes already in the cache are never replaced
// A packet is released exactly when offsets run contiguously from 0 through a
// fragment with MF clear.
class ReassemblyCache {
public:
    struct InsertResult {
        std::optional<Ipv4Packet> packet;  // set when reassembly completed
        bool evicted = false;              // capacity pressure dropped an entry
    };

    explicit ReassemblyCache(size_t capacity = 64, double timeout = 15.0)
        : capacity_(capacity), timeout_(timeout) {}

    size_t capacity() const { return capacity_; }
    double timeout() const { return timeout_; }
    void set_timeout(double t) { timeout_ = t; }
    size_t fragment_count() const { return count_; }
    uint64_t evictions() const { return evictions_; }

    InsertResult insert(const Ipv4Packet& frag, double now) {
        InsertResult result;
        prune(now);
        if (size_t(frag.header.fragment_offset) * 8 + frag.payload.size() > 65535)
            return result;  // malformed, ignore

        Key key{frag.header.src.value, frag.header.dst.value, frag.header.protocol,
                frag.header.ipid};
        auto found = entries_.find(key);
        if (found == entries_.end()) {
            found = entries_.emplace(key, Entry{{}, next_entry_seq_++}).first;
        }
        Entry& e = found->second;
        size_t begin = size_t(frag.header.fragment_offset) * 8;
        size_t end = begin + frag.payload.size();
        for (const auto& s : e.pieces) {
            size_t sb = size_t(s.frag.header.fragment_offset) * 8;
            size_t se = sb + s.frag.payload.size();
            if (begin < se && sb < end) return result;  // overlap: first fragment wins
        }
        e.pieces.push_back(Piece{frag, now});
        ++count_;

        // A fragment completing its packet releases it immediately and never
        // competes for cache space.
        if (auto whole = try_assemble(e)) {
            count_ -= e.pieces.size();
            entries_.erase(found);
            result.packet = std::move(whole);
            return result;
        }

        while (count_ > capacity_) {
            evict_oldest_entry();
            result.evicted = true;
            ++evictions_;
        }
        return result;
    }

private:
    using Key = std::tuple<uint32_t, uint32_t, uint8_t, uint16_t>;
    struct Piece {
        Ipv4Packet frag;
        double inserted_at;
    };
    struct Entry {
        std::vector<Piece> pieces;
        uint64_t seq = 0;  // creation order, breaks eviction ties
    };

    void prune(double now) {
        for (auto it = entries_.begin(); it != entries_.end();) {
            auto& pieces = it->second.pieces;
            size_t before = pieces.size();
            pieces.erase(std::remove_if(pieces.begin(), pieces.end(),
                                        [&](const Piece& p) {
                                            return now - p.inserted_at > timeout_;
                                        }),
                         pieces.end());
            count_ -= before - pieces.size();
            if (pieces.empty())
                it = entries_.erase(it);
            else
                ++it;
        }
    }

    void evict_oldest_entry() {
        auto oldest = entries_.end();
        double t = 0;
        uint64_t seq = 0;
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            double first = it->second.pieces.front().inserted_at;
            for (const auto& p : it->second.pieces) first = std::min(first, p.inserted_at);
            if (oldest == entries_.end() || first < t ||
                (first == t && it->second.seq < seq)) {
                oldest = it;
                t = first;
                seq = it->second.seq;
            }
        }
        if (oldest != entries_.end()) {
            count_ -= oldest->second.pieces.size();
            entries_.erase(oldest);
        }
    }

    std::optional<Ipv4Packet> try_assemble(Entry& e) {
        std::sort(e.pieces.begin(), e.pieces.end(), [](const Piece& a, const Piece& b) {
            return a.frag.header.fragment_offset < b.frag.header.fragment_offset;
        });
        size_t expect = 0;
        const Piece* last = nullptr;
        for (const auto& p : e.pieces) {
            if (size_t(p.frag.header.fragment_offset) * 8 != expect) return std::nullopt;
            expect += p.frag.payload.size();
            last = &p;
            if (!p.frag.header.mf_flag) break;
        }
        if (!last || last->frag.header.mf_flag) return std::nullopt;

        Ipv4Packet whole;
        whole.header = e.pieces.front().frag.header;
        whole.header.mf_flag = false;
        whole.header.fragment_offset = 0;
        for (const auto& p : e.pieces) {
            whole.payload.insert(whole.payload.end(), p.frag.payload.begin(),
                                 p.frag.payload.end());
            if (!p.frag.header.mf_flag) break;
        }
        whole.header.total_length = static_cast<uint16_t>(whole.total_length());
        return whole;
    }

    std::map<Key, Entry> entries_;
    uint64_t next_entry_seq_ = 0;
    size_t capacity_;
    double timeout_;
    size_t count_ = 0;
    uint64_t evictions_ = 0;
};

} // namespace dnslab
