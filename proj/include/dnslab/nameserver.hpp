#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnslab/dns.hpp"
#include "dnslab/fragment.hpp"
#include "dnslab/icmp.hpp"
#include "dnslab/rng.hpp"
#include "dnslab/simnet.hpp"
#include "dnslab/udp.hpp"

namespace dnslab {

struct Zone {
    std::string origin;
    std::vector<ResourceRecord> records;
    bool signed_zone = false;

    bool in_zone(const std::string& name) const {
        std::string n = canonical_name(name), o = canonical_name(origin);
        if (n == o) return true;
        return n.size() > o.size() && n.compare(n.size() - o.size() - 1, o.size() + 1, "." + o) == 0;
    }

    std::vector<ResourceRecord> find(const std::string& name, RrType type) const {
        std::vector<ResourceRecord> out;
        for (const auto& rr : records)
            if (rr.rrtype == type && canonical_name(rr.name) == canonical_name(name))
                out.push_back(rr);
        return out;
    }

    bool contains_record(const ResourceRecord& rr) const {
        for (const auto& r : records)
            if (r == rr) return true;
        return false;
    }
};

// IPID assignment. `global` keeps one counter for all destinations and can be
// given a background traffic rate: between observations the counter drifts by
// a Poisson number of increments, which is what the off-path prediction has
// to beat.
struct IpidStrategy {
    enum class Kind { GlobalIncrementing, PerDestination, Random, Zero };
    Kind kind = Kind::GlobalIncrementing;
    uint16_t start = 0;
    double background_rate = 0.0;  // packets/sec, global counter only

    uint16_t next(Ipv4Addr dst, double now, Rng& rng) {
        switch (kind) {
            case Kind::GlobalIncrementing: {
                advance_background(now, rng);
                return global_counter_++;
            }
            case Kind::PerDestination:
                return per_dest_[dst.value]++;
            case Kind::Zero:
                return 0;
            case Kind::Random: {
                for (;;) {
                    uint16_t v = rng.uniform_u16();
                    bool seen = false;
                    for (uint16_t r : recent_)
                        if (r == v) seen = true;
                    if (seen) continue;  // collision inside the in-flight window
                    recent_.push_back(v);
                    if (recent_.size() > 64) recent_.pop_front();
                    return v;
                }
            }
        }
        return 0;
    }

    void seed_counters() {
        global_counter_ = start;
    }

    void advance_background(double now, Rng& rng) {
        if (kind != Kind::GlobalIncrementing || background_rate <= 0) {
            last_seen_ = now;
            return;
        }
        if (now > last_seen_)
            global_counter_ = static_cast<uint16_t>(
                global_counter_ + rng.poisson(background_rate * (now - last_seen_)));
        last_seen_ = now;
    }

    uint16_t global_counter_ = 0;
    std::map<uint32_t, uint16_t> per_dest_;
    std::deque<uint16_t> recent_;
    double last_seen_ = 0.0;
};

// (destination, protocol) -> path MTU learned from ICMP fragmentation-needed.
class PmtuCache {
public:
    explicit PmtuCache(double lifetime = 600.0) : lifetime_(lifetime) {}

    void store(Ipv4Addr dst, uint8_t protocol, uint16_t mtu, double now) {
        entries_[{dst.value, protocol}] = {std::max<uint16_t>(kMinMtu, mtu), now + lifetime_};
    }

    std::optional<uint16_t> lookup(Ipv4Addr dst, uint8_t protocol, double now) const {
        auto it = entries_.find({dst.value, protocol});
        if (it == entries_.end() || now >= it->second.expiry) return std::nullopt;
        return it->second.mtu;
    }

private:
    struct Entry {
        uint16_t mtu;
        double expiry;
    };
    std::map<std::pair<uint32_t, uint8_t>, Entry> entries_;
    double lifetime_;
};

struct ResponsePolicy {
    enum class Ordering { Stable, Shuffled };
    Ordering ordering = Ordering::Stable;
    uint32_t record_set_rotation = 1;  // number of distinct answer sets served
    std::optional<double> rate_limit;  // responses per second
    bool muted = false;
    uint16_t pad_to = 0;       // pad responses with a TXT filler up to this total size
    uint16_t edns_size = 4096; // 0 = no OPT record in responses
};

// Authoritative nameserver state machine. One instance per simulated host,
// driven from the event loop only.
class NameserverModel {
public:
    NameserverModel(Sim& sim, HostId host, Zone zone, IpidStrategy ipid,
                    ResponsePolicy policy)
        : sim_(&sim),
          host_(host),
          zone_(std::move(zone)),
          ipid_(ipid),
          policy_(policy),
          rng_(sim.split_rng("ns/" + sim.host_name(host))) {
        ipid_.seed_counters();
    }

    void attach() {
        sim_->set_handler(host_, [this](const Ipv4Packet& p) { on_packet(p); });
    }

    Zone& zone() { return zone_; }
    const Zone& zone() const { return zone_; }
    ResponsePolicy& policy() { return policy_; }
    IpidStrategy& ipid() { return ipid_; }
    void set_honor_ptb(bool v) { honor_ptb_ = v; }
    void set_muted(bool v) { policy_.muted = v; }
    Ipv4Addr ip() const { return sim_->host_ips(host_).front(); }
    uint64_t queries_seen() const { return queries_seen_; }
    const std::vector<double>& query_times() const { return query_times_; }

    uint16_t next_ipid(Ipv4Addr dst, double now) { return ipid_.next(dst, now, rng_); }

    void on_packet(const Ipv4Packet& p) {
        if (p.header.protocol == kProtoIcmp) {
            try {
                handle_icmp_ptb(IcmpMessage::decode(p.payload), sim_->now());
            } catch (const ParseError&) {
            }
            return;
        }
        if (p.header.protocol != kProtoUdp || p.is_fragment()) return;
        UdpPorts ports{};
        try {
            ports = peek_udp_ports(p);
        } catch (const ParseError&) {
            return;
        }
        if (ports.dst_port != 53) return;
        for (auto& frag : handle_query(p, sim_->now())) sim_->send(host_, std::move(frag));
    }

    // Answers one query packet, fragmenting per the PMTU cache. Returns no
    // packets when muted or over the response rate limit.
    std::vector<Ipv4Packet> handle_query(const Ipv4Packet& query, double now) {
        ++queries_seen_;
        query_times_.push_back(now);
        if (policy_.muted) {
            sim_->log(now, sim_->host_name(host_), "-", "ns.muted", "query dropped");
            return {};
        }
        if (policy_.rate_limit) {
            while (!recent_responses_.empty() && now - recent_responses_.front() > 1.0)
                recent_responses_.pop_front();
            if (double(recent_responses_.size()) >= *policy_.rate_limit) {
                sim_->log(now, sim_->host_name(host_), "-", "ns.ratelimited", "query dropped");
                return {};
            }
            recent_responses_.push_back(now);
        }

        DnsMessage q;
        UdpPorts ports{};
        try {
            q = DnsMessage::decode(udp_payload_view(query));
            ports = peek_udp_ports(query);
        } catch (const ParseError&) {
            return {};
        }
        if (q.question.empty()) return {};

        DnsMessage resp = build_response(q, now);
        Bytes wire = resp.encode();
        uint16_t ipid = next_ipid(query.header.src, now);
        Ipv4Packet packet = make_udp_packet(query.header.dst, query.header.src, 53,
                                            ports.src_port, wire, ipid);
        packet.header.total_length = static_cast<uint16_t>(packet.total_length());

        auto mtu = pmtu_.lookup(query.header.src, kProtoUdp, now);
        if (mtu && packet.total_length() > *mtu) return fragment(packet, *mtu);
        return {packet};
    }

    // Fragmentation-needed handling: the stored MTU is clamped to the RFC 791
    // minimum and expires after the cache lifetime. No origin validation is
    // performed; any host on (or off) the path may have sent it.
    void handle_icmp_ptb(const IcmpMessage& icmp, double now) {
        if (!honor_ptb_) return;
        if (icmp.icmp_type != kIcmpDestUnreachable || icmp.code != kIcmpCodeFragNeeded) return;
        Ipv4Header embedded;
        try {
            embedded = icmp.embedded_header();
        } catch (const std::exception&) {
            return;
        }
        bool ours = false;
        for (auto a : sim_->host_ips(host_)) ours |= (a == embedded.src);
        if (!ours) return;
        pmtu_.store(embedded.dst, embedded.protocol, icmp.next_hop_mtu, now);
        sim_->log(now, sim_->host_name(host_), embedded.dst.str(), "ns.pmtu",
                  "mtu " + std::to_string(std::max<uint16_t>(kMinMtu, icmp.next_hop_mtu)));
    }

    PmtuCache& pmtu() { return pmtu_; }

private:
    DnsMessage build_response(const DnsMessage& q, double now) {
        const Question& question = q.question.front();
        DnsMessage resp;
        resp.txid = q.txid;
        resp.qr = true;
        resp.rd = q.rd;
        resp.ra = false;
        resp.question = q.question;

        if (!zone_.in_zone(question.qname)) {
            resp.rcode = kRcodeRefused;
            return resp;
        }
        resp.aa = true;

        auto answers = zone_.find(question.qname, question.qtype);
        if (answers.empty() && question.qtype != RrType::CNAME) {
            auto cnames = zone_.find(question.qname, RrType::CNAME);
            answers = cnames;  // alias answer; the resolver chases it
        }
        if (policy_.record_set_rotation > 1 && answers.size() > 1) {
            uint32_t shift = rotation_counter_++ % policy_.record_set_rotation;
            std::rotate(answers.begin(), answers.begin() + (shift % answers.size()),
                        answers.end());
        }
        if (policy_.ordering == ResponsePolicy::Ordering::Shuffled) rng_.shuffle(answers);
        resp.answers = answers;

        // Glue: address records for MX targets served from the same zone.
        for (const auto& rr : answers) {
            if (rr.rrtype != RrType::MX) continue;
            for (const auto& a : zone_.find(std::get<MxData>(rr.rdata).target, RrType::A))
                resp.additional.push_back(a);
        }
        if (policy_.edns_size > 0) resp.additional.push_back(ResourceRecord::opt(policy_.edns_size));

        if (policy_.pad_to > 0) pad_response(resp);
        (void)now;
        return resp;
    }

    // Grows the response with a TXT filler so the IP packet reaches at least
    // pad_to bytes (exactly pad_to when the gap fits a single record). The
    // filler sits in the additional section ahead of OPT.
    void pad_response(DnsMessage& resp) {
        size_t total = 28 + resp.encode().size();  // 20 IP + 8 UDP
        if (total >= policy_.pad_to) return;
        size_t need = policy_.pad_to - total;
        std::string pad_name = "filler." + canonical_name(zone_.origin);
        size_t fixed = pad_name.size() + 2 + 10;  // name wire + type/class/ttl/rdlen
        size_t rdata_len = need > fixed ? need - fixed : 1;
        std::vector<std::string> strings;
        size_t rem = rdata_len;  // each string of length L occupies L + 1 bytes
        while (rem > 256) {
            strings.push_back(std::string(255, 'x'));
            rem -= 256;
        }
        strings.push_back(std::string(rem - 1, 'x'));
        ResourceRecord filler = ResourceRecord::txt(pad_name, strings, 0);
        auto it = resp.additional.end();
        if (!resp.additional.empty() && resp.additional.back().rrtype == RrType::OPT)
            it = resp.additional.end() - 1;
        resp.additional.insert(it, filler);
    }

    Sim* sim_;
    HostId host_;
    Zone zone_;
    IpidStrategy ipid_;
    ResponsePolicy policy_;
    PmtuCache pmtu_;
    Rng rng_;
    bool honor_ptb_ = true;
    uint32_t rotation_counter_ = 0;
    std::deque<double> recent_responses_;
    uint64_t queries_seen_ = 0;
    std::vector<double> query_times_;
};

} // namespace dnslab
