#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnslab/dns.hpp"
#include "dnslab/fragment.hpp"
#include "dnslab/icmp.hpp"
#include "dnslab/simnet.hpp"
#include "dnslab/udp.hpp"

namespace dnslab {

// Global token window for ICMP port-unreachable emission: at most `limit`
// messages inside any trailing 1-second window, across all destinations.
// An optional per-IP window can sit on top.
class IcmpRateLimiter {
public:
    explicit IcmpRateLimiter(size_t limit = 50, double window = 1.0)
        : limit_(limit), window_(window) {}

    void enable_per_ip(size_t limit) { per_ip_limit_ = limit; }

    bool allow(double now, Ipv4Addr dst) {
        while (!recent_.empty() && now - recent_.front() > window_) recent_.pop_front();
        if (recent_.size() >= limit_) return false;
        if (per_ip_limit_) {
            auto& dq = per_ip_[dst.value];
            while (!dq.empty() && now - dq.front() > window_) dq.pop_front();
            if (dq.size() >= *per_ip_limit_) return false;
            dq.push_back(now);
        }
        recent_.push_back(now);
        return true;
    }

    size_t tokens_left(double now) {
        while (!recent_.empty() && now - recent_.front() > window_) recent_.pop_front();
        return limit_ - recent_.size();
    }

private:
    size_t limit_;
    double window_;
    std::deque<double> recent_;
    std::optional<size_t> per_ip_limit_;
    std::map<uint32_t, std::deque<double>> per_ip_;
};

struct ResolverConfig {
    bool dnssec_validate = false;
    enum class TimeoutMode { Fixed, RttDynamic } timeout_mode = TimeoutMode::Fixed;
    double fixed_timeout = 0.8;  // doubled on every retransmission
    int max_retries = 2;         // retransmissions after the first attempt
    uint16_t edns_size = 4096;
    bool accepts_fragments = true;
    uint16_t port_min = 1024;
    uint16_t port_max = 65535;
    enum class IcmpMode { None, Unlimited, GlobalLimited } icmp_mode = IcmpMode::GlobalLimited;
    size_t icmp_limit = 50;
    double reassembly_timeout = 15.0;
    size_t reassembly_capacity = 64;
    int rate_guard_max = 2;  // client queries per key per second before SERVFAIL
};

struct CacheEntry {
    std::vector<ResourceRecord> records;
    double inserted_at = 0;
    uint32_t ttl = 0;
};

struct ResolveResult {
    bool ok = false;
    std::vector<ResourceRecord> records;
};
using ResolveCallback = std::function<void(const ResolveResult&)>;

// Caching recursive resolver model: randomised (port, txid) per query, strict
// response matching, fragment reassembly ahead of UDP checksum verification,
// CNAME chasing, fixed or RTT-derived retransmission timers, and the global
// ICMP port-unreachable limit that SadDNS leans on.
class ResolverModel {
public:
    struct ZoneInfo {
        std::string domain;
        std::vector<Ipv4Addr> nameservers;
        bool signed_zone = false;
        // Boolean DNSSEC model: with a signed zone and a validating resolver,
        // only records the genuine zone serves pass validation.
        std::function<bool(const ResourceRecord&)> genuine;
    };

    ResolverModel(Sim& sim, HostId host, ResolverConfig cfg)
        : sim_(&sim),
          host_(host),
          cfg_(cfg),
          reasm_(cfg.reassembly_capacity, cfg.reassembly_timeout),
          limiter_(cfg.icmp_limit, 1.0),
          rng_(sim.split_rng("resolver/" + sim.host_name(host))) {}

    void attach() {
        sim_->set_handler(host_, [this](const Ipv4Packet& p) { on_packet(p); });
    }

    void add_zone(ZoneInfo z) { zones_.push_back(std::move(z)); }
    ResolverConfig& config() { return cfg_; }
    Ipv4Addr ip() const { return sim_->host_ips(host_).front(); }
    IcmpRateLimiter& limiter() { return limiter_; }
    ReassemblyCache& reassembly() { return reasm_; }

    // --- client side ---------------------------------------------------------

    void resolve(const std::string& qname_in, RrType qtype, ResolveCallback cb) {
        double now = sim_->now();
        std::string qname = canonical_name(qname_in);

        auto& guard = rate_guard_[key(qname, qtype)];
        while (!guard.empty() && now - guard.front() > 1.0) guard.pop_front();
        if (int(guard.size()) >= cfg_.rate_guard_max) {
            sim_->log(now, name(), qname, "resolver.srvfail", "query rate guard");
            cb(ResolveResult{false, {}});
            return;
        }
        guard.push_back(now);

        resolve_internal(qname, qtype, 0, std::move(cb));
    }

    // Cache lookup only; no packets. Used by the provider's mail path when a
    // record is already cached and by tests.
    std::optional<std::vector<ResourceRecord>> cache_get(const std::string& qname, RrType qtype) {
        auto it = cache_.find(key(canonical_name(qname), qtype));
        if (it == cache_.end()) return std::nullopt;
        if (sim_->now() >= it->second.inserted_at + it->second.ttl) {
            cache_.erase(it);
            return std::nullopt;
        }
        return it->second.records;
    }

    // `name type ttl rdata` per record, sorted; the run report embeds this.
    std::vector<std::string> dump_cache() const {
        std::vector<std::string> lines;
        for (const auto& [k, e] : cache_)
            for (const auto& rr : e.records)
                lines.push_back(canonical_name(rr.name) + " " + rrtype_name(rr.rrtype) + " " +
                                std::to_string(rr.ttl) + " " + rr.rdata_str());
        std::sort(lines.begin(), lines.end());
        return lines;
    }

    bool cache_maps(const std::string& qname, RrType t, const std::string& rdata) const {
        auto it = cache_.find(key(canonical_name(qname), t));
        if (it == cache_.end()) return false;
        for (const auto& rr : it->second.records)
            if (rr.rdata_str() == rdata) return true;
        return false;
    }

    // --- wire side ------------------------------------------------------------

    void on_packet(const Ipv4Packet& packet) {
        if (packet.header.protocol == kProtoIcmp) return;  // not consumed by this model
        if (packet.header.protocol != kProtoUdp) return;
        double now = sim_->now();

        const Ipv4Packet* whole = &packet;
        Ipv4Packet assembled;
        if (packet.is_fragment()) {
            if (!cfg_.accepts_fragments) {
                sim_->log(now, name(), "-", "resolver.drop", "fragment rejected by config");
                return;
            }
            auto res = reasm_.insert(packet, now);
            if (!res.packet) return;
            assembled = std::move(*res.packet);
            whole = &assembled;
        }

        UdpPorts ports{};
        try {
            ports = peek_udp_ports(*whole);
        } catch (const ParseError&) {
            return;
        }

        PendingQuery* pending = find_pending(ports.dst_port);
        if (!pending) {
            handle_closed_port(*whole, now);
            return;
        }
        on_response(*whole, *pending, ports, now);
    }

    size_t pending_count() const { return pendings_.size(); }

    uint64_t icmp_emitted() const { return icmp_emitted_; }

    // Read-only view of in-flight queries, exported for assertions. Nothing
    // inside the model (and no attack code) goes through this.
    struct PendingSnapshot {
        std::string qname;
        RrType qtype;
        Ipv4Addr ns;
        uint16_t src_port;
        uint16_t txid;
        double issued_at;
    };
    std::vector<PendingSnapshot> pending_snapshot() const {
        std::vector<PendingSnapshot> out;
        for (const auto& p : pendings_)
            out.push_back(PendingSnapshot{p.qname, p.qtype, p.ns, p.src_port, p.txid,
                                          p.issued_at});
        return out;
    }

private:
    struct PendingQuery {
        uint64_t id;
        std::string qname;
        RrType qtype;
        Ipv4Addr ns;  // nameserver the current attempt was sent to
        uint16_t src_port;
        uint16_t txid;
        double issued_at;
        double last_sent;
        double timeout;
        int retries_left;
        int depth;
        std::vector<ResolveCallback> callbacks;
        uint64_t attempt = 0;
    };

    std::string name() const { return sim_->host_name(host_); }

    static std::pair<std::string, uint16_t> key(const std::string& n, RrType t) {
        return {canonical_name(n), static_cast<uint16_t>(t)};
    }

    const ZoneInfo* zone_for(const std::string& qname) const {
        const ZoneInfo* best = nullptr;
        std::string n = canonical_name(qname);
        for (const auto& z : zones_) {
            std::string d = canonical_name(z.domain);
            bool match = n == d || (n.size() > d.size() &&
                                    n.compare(n.size() - d.size() - 1, d.size() + 1, "." + d) == 0);
            if (match && (!best || d.size() > canonical_name(best->domain).size())) best = &z;
        }
        return best;
    }

    void resolve_internal(const std::string& qname, RrType qtype, int depth,
                          ResolveCallback cb) {
        double now = sim_->now();
        if (depth > 8) {
            cb(ResolveResult{false, {}});
            return;
        }
        if (auto cached = cache_get(qname, qtype)) {
            sim_->log(now, name(), qname, "resolver.cachehit", rrtype_name(qtype));
            cb(ResolveResult{true, *cached});
            return;
        }
        // Cached alias: chase it without re-querying the alias owner.
        if (qtype != RrType::CNAME) {
            if (auto alias = cache_get(qname, RrType::CNAME)) {
                const auto& target = std::get<std::string>(alias->front().rdata);
                resolve_internal(target, qtype, depth + 1, std::move(cb));
                return;
            }
        }

        for (auto& p : pendings_) {
            if (p.qname == qname && p.qtype == qtype) {
                p.callbacks.push_back(std::move(cb));
                return;
            }
        }

        const ZoneInfo* zone = zone_for(qname);
        if (!zone || zone->nameservers.empty()) {
            sim_->log(now, name(), qname, "resolver.srvfail", "no nameservers known");
            cb(ResolveResult{false, {}});
            return;
        }

        PendingQuery p;
        p.id = next_id_++;
        p.qname = qname;
        p.qtype = qtype;
        p.ns = zone->nameservers[rng_.uniform(zone->nameservers.size())];
        p.src_port = static_cast<uint16_t>(rng_.uniform_range(cfg_.port_min, cfg_.port_max));
        p.txid = rng_.uniform_u16();
        p.issued_at = now;
        p.timeout = initial_timeout();
        p.retries_left = cfg_.max_retries;
        p.depth = depth;
        p.callbacks.push_back(std::move(cb));
        pendings_.push_back(std::move(p));
        send_attempt(pendings_.back());
    }

    double initial_timeout() const {
        if (cfg_.timeout_mode == ResolverConfig::TimeoutMode::Fixed) return cfg_.fixed_timeout;
        return std::max(0.2, 3.0 * rtt_ewma_);
    }

    void send_attempt(PendingQuery& p) {
        double now = sim_->now();
        p.last_sent = now;
        uint64_t attempt = ++p.attempt;
        DnsMessage q = make_query(p.txid, p.qname, p.qtype, cfg_.edns_size);
        Ipv4Packet pkt = make_udp_packet(ip(), p.ns, p.src_port, 53, q.encode(),
                                         static_cast<uint16_t>(rng_.uniform_u16()));
        sim_->log(now, name(), p.ns.str(), "dns.query",
                  p.qname + " " + rrtype_name(p.qtype) + " port " + std::to_string(p.src_port) +
                      " txid " + std::to_string(p.txid));
        sim_->send(host_, std::move(pkt));
        uint64_t id = p.id;
        double deadline = now + p.timeout;
        sim_->at(deadline, [this, id, attempt]() { on_timeout(id, attempt); });
    }

    void on_timeout(uint64_t id, uint64_t attempt) {
        auto it = std::find_if(pendings_.begin(), pendings_.end(),
                               [&](const PendingQuery& p) { return p.id == id; });
        if (it == pendings_.end() || it->attempt != attempt) return;
        if (it->retries_left > 0) {
            it->retries_left--;
            it->timeout *= 2.0;
            const ZoneInfo* zone = zone_for(it->qname);
            if (zone && !zone->nameservers.empty())
                it->ns = zone->nameservers[rng_.uniform(zone->nameservers.size())];
            sim_->log(sim_->now(), name(), it->ns.str(), "dns.retransmit",
                      it->qname + " timeout now " + std::to_string(it->timeout));
            send_attempt(*it);
            return;
        }
        sim_->log(sim_->now(), name(), it->qname, "resolver.srvfail", "retries exhausted");
        complete(*it, ResolveResult{false, {}});
    }

    PendingQuery* find_pending(uint16_t dst_port) {
        for (auto& p : pendings_)
            if (p.src_port == dst_port) return &p;
        return nullptr;
    }

    void on_response(const Ipv4Packet& packet, PendingQuery& p, const UdpPorts& ports,
                     double now) {
        if (packet.header.src != p.ns || ports.src_port != 53) {
            sim_->log(now, name(), packet.header.src.str(), "resolver.drop",
                      "response source mismatch");
            return;
        }
        if (!verify_udp_checksum(packet)) {
            sim_->log(now, name(), packet.header.src.str(), "resolver.drop", "udp checksum");
            return;
        }
        DnsMessage m;
        try {
            m = DnsMessage::decode(udp_payload_view(packet));
        } catch (const ParseError&) {
            sim_->log(now, name(), packet.header.src.str(), "resolver.drop", "dns parse");
            return;
        }
        if (m.txid != p.txid || !m.qr || m.question.empty()) {
            sim_->log(now, name(), packet.header.src.str(), "resolver.drop", "txid/flags");
            return;
        }
        Question expect{p.qname, p.qtype, kClassIn};
        if (!(m.question.front() == expect)) {
            sim_->log(now, name(), packet.header.src.str(), "resolver.drop", "question");
            return;
        }

        const ZoneInfo* zone = zone_for(p.qname);
        if (cfg_.dnssec_validate && zone && zone->signed_zone && zone->genuine) {
            for (const auto& rr : m.answers) {
                if (rr.rrtype == RrType::OPT) continue;
                if (!zone->genuine(rr)) {
                    sim_->log(now, name(), p.qname, "resolver.dnssec_reject",
                              rr.name + " " + rrtype_name(rr.rrtype) + " " + rr.rdata_str());
                    return;
                }
            }
        }

        // Accepted.
        double rtt = now - p.last_sent;
        rtt_ewma_ = 0.75 * rtt_ewma_ + 0.25 * rtt;

        if (m.rcode != kRcodeNoError) {
            sim_->log(now, name(), p.qname, "resolver.srvfail",
                      "rcode " + std::to_string(m.rcode));
            complete(p, ResolveResult{false, {}});
            return;
        }

        // Bailiwick: cache only answers owned by the question name or by a
        // name reached from it through CNAMEs inside this response.
        std::vector<std::string> chain{canonical_name(p.qname)};
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& rr : m.answers) {
                if (rr.rrtype != RrType::CNAME) continue;
                std::string owner = canonical_name(rr.name);
                if (std::find(chain.begin(), chain.end(), owner) != chain.end()) {
                    const auto& target = canonical_name(std::get<std::string>(rr.rdata));
                    if (std::find(chain.begin(), chain.end(), target) == chain.end()) {
                        chain.push_back(target);
                        grew = true;
                    }
                }
            }
        }
        std::vector<ResourceRecord> in_bailiwick;
        for (const auto& rr : m.answers) {
            if (rr.rrtype == RrType::OPT) continue;
            if (std::find(chain.begin(), chain.end(), canonical_name(rr.name)) != chain.end())
                in_bailiwick.push_back(rr);
        }
        for (const auto& rr : in_bailiwick) cache_put(rr, now);

        // Terminal records of the requested type, if this response has them.
        std::vector<ResourceRecord> terminal;
        for (const auto& rr : in_bailiwick)
            if (rr.rrtype == p.qtype) terminal.push_back(rr);

        sim_->log(now, name(), p.qname, "dns.response",
                  "answers " + std::to_string(m.answers.size()) + " cached " +
                      std::to_string(in_bailiwick.size()));

        if (!terminal.empty() || p.qtype == RrType::CNAME) {
            complete(p, ResolveResult{true, terminal});
            return;
        }
        // Alias without the target type: chase the tail of the chain.
        if (chain.size() > 1) {
            std::string tail = chain.back();
            RrType qtype = p.qtype;
            int depth = p.depth;
            auto callbacks = std::move(p.callbacks);
            remove_pending(p.id);
            sim_->log(now, name(), tail, "dns.cname_chase", "");
            resolve_internal(tail, qtype, depth + 1, [callbacks](const ResolveResult& r) {
                for (const auto& cb : callbacks) cb(r);
            });
            return;
        }
        complete(p, ResolveResult{m.rcode == kRcodeNoError, terminal});
    }

    void handle_closed_port(const Ipv4Packet& packet, double now) {
        if (cfg_.icmp_mode == ResolverConfig::IcmpMode::None) return;
        if (cfg_.icmp_mode == ResolverConfig::IcmpMode::GlobalLimited &&
            !limiter_.allow(now, packet.header.src)) {
            sim_->log(now, name(), packet.header.src.str(), "icmp.suppressed", "rate limit");
            return;
        }
        ++icmp_emitted_;
        IcmpMessage icmp = make_port_unreachable(packet);
        sim_->log(now, name(), packet.header.src.str(), "icmp.port_unreachable", "");
        sim_->send(host_, make_icmp_packet(ip(), packet.header.src, icmp));
    }

    void cache_put(const ResourceRecord& rr, double now) {
        if (rr.ttl == 0) return;
        auto& e = cache_[key(rr.name, rr.rrtype)];
        // A later response to a still-pending query replaces; merged records
        // of one rrset accumulate.
        if (e.records.empty() || e.inserted_at != now) {
            e.records.clear();
            e.inserted_at = now;
            e.ttl = rr.ttl;
        }
        for (const auto& existing : e.records)
            if (existing == rr) return;
        e.records.push_back(rr);
        e.ttl = std::min(e.ttl, rr.ttl);
        sim_->log(now, name(), rr.name, "cache.insert",
                  std::string(rrtype_name(rr.rrtype)) + " " + rr.rdata_str());
    }

    void complete(PendingQuery& p, const ResolveResult& r) {
        auto callbacks = std::move(p.callbacks);
        remove_pending(p.id);
        for (const auto& cb : callbacks) cb(r);
    }

    void remove_pending(uint64_t id) {
        pendings_.remove_if([&](const PendingQuery& p) { return p.id == id; });
    }

    Sim* sim_;
    HostId host_;
    ResolverConfig cfg_;
    std::vector<ZoneInfo> zones_;
    std::map<std::pair<std::string, uint16_t>, CacheEntry> cache_;
    std::list<PendingQuery> pendings_;
    ReassemblyCache reasm_;
    IcmpRateLimiter limiter_;
    Rng rng_;
    double rtt_ewma_ = 0.1;
    uint64_t next_id_ = 1;
    uint64_t icmp_emitted_ = 0;
    std::map<std::pair<std::string, uint16_t>, std::deque<double>> rate_guard_;
};

} // namespace dnslab
