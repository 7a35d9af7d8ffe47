#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "dnslab/bytes.hpp"
#include "dnslab/ip.hpp"
#include "dnslab/rng.hpp"

namespace dnslab {

using HostId = size_t;

struct LogRecord {
    double time;
    std::string src;
    std::string dst;
    std::string kind;
    std::string detail;

    std::string line() const {
        char t[32];
        std::snprintf(t, sizeof t, "%.6f", time);
        return std::string(t) + " | " + src + " | " + dst + " | " + kind + " | " + detail;
    }
};

enum class SendStatus { Delivered, NoRoute, SpoofBlocked, Lost };

struct HijackAnnouncement {
    HostId attacker = 0;
    Prefix prefix;
    enum class Kind { SamePrefix, SubPrefix } kind = Kind::SubPrefix;
    double t_start = 0;
    double t_end = 0;
    std::optional<int> preference;  // same-prefix only; unset draws acceptance
};

// Deterministic single-threaded event network. Hosts receive whole packets;
// links carry a fixed latency and no loss unless the scenario turns the loss
// knob. Routing is longest-prefix match over the static table plus whatever
// hijack announcements are active at send time, so "who receives this packet"
// is the only routing question the model answers.
class Sim {
public:
    enum class LogMode { Off, DigestOnly, Full };

    explicit Sim(uint64_t seed)
        : root_rng_(seed), route_rng_(root_rng_.split("routing")) {}

    // --- topology -----------------------------------------------------------

    HostId add_host(const std::string& name, std::vector<Ipv4Addr> ips, bool bcp38 = false) {
        hosts_.push_back(Host{name, std::move(ips), bcp38, nullptr});
        return hosts_.size() - 1;
    }

    void set_handler(HostId h, std::function<void(const Ipv4Packet&)> fn) {
        hosts_.at(h).handler = std::move(fn);
    }

    void add_link(HostId a, HostId b, double latency) {
        links_[std::minmax(a, b)] = latency;
    }

    void add_route(const Prefix& p, HostId host, int preference = 100) {
        routes_.push_back(Route{p, host, preference, routes_.size()});
    }

    void set_default_latency(double l) { default_latency_ = l; }
    void set_loss_probability(double p) { loss_probability_ = p; }
    // Uniform extra delay in [0, j) per delivery; a nonzero value permits
    // packet reordering.
    void set_latency_jitter(double j) { latency_jitter_ = j; }
    void set_same_prefix_acceptance(double p) { same_prefix_acceptance_ = p; }

    const std::string& host_name(HostId h) const { return hosts_.at(h).name; }
    const std::vector<Ipv4Addr>& host_ips(HostId h) const { return hosts_.at(h).ips; }

    std::optional<HostId> host_by_name(const std::string& name) const {
        for (HostId i = 0; i < hosts_.size(); ++i)
            if (hosts_[i].name == name) return i;
        return std::nullopt;
    }

    std::optional<HostId> owner_of(Ipv4Addr ip) const {
        for (HostId i = 0; i < hosts_.size(); ++i)
            for (auto a : hosts_[i].ips)
                if (a == ip) return i;
        return std::nullopt;
    }

    // --- clock and events ---------------------------------------------------

    double now() const { return now_; }

    void at(double t, std::function<void()> fn) {
        queue_.push(Event{std::max(t, now_), seq_++, std::move(fn)});
    }

    void after(double dt, std::function<void()> fn) { at(now_ + dt, std::move(fn)); }

    // Processes every event with timestamp <= t in (time, insertion) order.
    // Returns the log records emitted during this call when full logging is on.
    std::vector<LogRecord> run_until(double t) {
        size_t mark = log_.size();
        while (!queue_.empty() && queue_.top().time <= t) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            ev.fn();
        }
        if (t > now_) now_ = t;
        return {log_.begin() + static_cast<long>(mark), log_.end()};
    }

    bool idle() const { return queue_.empty(); }

    // --- sending ------------------------------------------------------------

    // The packet's header.src is the claimed source address; spoofing is the
    // normal case for the attacker and is only stopped by a BCP38 host flag.
    // `bypass_own_hijacks` makes the sender's router forward along the
    // genuine route even while the sender's own announcement is active.
    SendStatus send(HostId from, Ipv4Packet packet, bool bypass_own_hijacks = false) {
        const Host& h = hosts_.at(from);
        bool own = false;
        for (auto a : h.ips) own |= (a == packet.header.src);
        if (h.bcp38 && !own) {
            log(now_, h.name, packet.header.dst.str(), "drop.spoof",
                "bcp38 blocked claimed src " + packet.header.src.str());
            return SendStatus::SpoofBlocked;
        }
        auto route = lookup(packet.header.dst, bypass_own_hijacks
                                                   ? std::optional<HostId>(from)
                                                   : std::nullopt);
        if (!route) {
            log(now_, h.name, packet.header.dst.str(), "drop.noroute", "");
            return SendStatus::NoRoute;
        }
        if (loss_probability_ > 0 && route_rng_.bernoulli(loss_probability_)) {
            log(now_, h.name, hosts_[*route].name, "drop.loss", "");
            return SendStatus::Lost;
        }
        HostId to = *route;
        double lat = latency(from, to);
        if (latency_jitter_ > 0) lat += route_rng_.uniform01() * latency_jitter_;
        log(now_, h.name, hosts_[to].name, "send",
            packet.header.src.str() + " -> " + packet.header.dst.str() + " proto " +
                std::to_string(packet.header.protocol) + " len " +
                std::to_string(packet.total_length()));
        at(now_ + lat, [this, to, p = std::move(packet)]() {
            log(now_, p.header.src.str(), hosts_[to].name, "deliver",
                "dst " + p.header.dst.str());
            if (hosts_[to].handler) hosts_[to].handler(p);
        });
        ++packets_sent_;
        return SendStatus::Delivered;
    }

    SendStatus send(HostId from, Ipv4Packet packet, Ipv4Addr claimed_src) {
        packet.header.src = claimed_src;
        return send(from, std::move(packet));
    }

    uint64_t packets_sent() const { return packets_sent_; }

    // --- hijacks ------------------------------------------------------------

    // Registers an announcement. A sub-prefix hijack always takes effect for
    // its interval (longest prefix wins); a same-prefix hijack takes effect
    // only when it outranks the victim route, either by explicit preference or
    // by a single acceptance draw made here.
    bool announce(const HijackAnnouncement& h) {
        Hijack hj;
        hj.ann = h;
        hj.order = routes_.size() + hijacks_.size();
        if (h.kind == HijackAnnouncement::Kind::SamePrefix) {
            int victim_pref = 0;
            for (const auto& r : routes_)
                if (r.prefix == h.prefix) victim_pref = std::max(victim_pref, r.preference);
            int pref = h.preference ? *h.preference
                                    : (route_rng_.bernoulli(same_prefix_acceptance_)
                                           ? victim_pref + 1
                                           : victim_pref - 1);
            hj.accepted = pref > victim_pref;
            hj.preference = pref;
        } else {
            hj.accepted = true;
            hj.preference = 0;
        }
        hijacks_.push_back(hj);
        log(now_, hosts_.at(h.attacker).name, h.prefix.str(), "hijack.announce",
            std::string(h.kind == HijackAnnouncement::Kind::SubPrefix ? "sub-prefix"
                                                                      : "same-prefix") +
                (hj.accepted ? " accepted" : " not-accepted"));
        return hj.accepted;
    }

    void withdraw(const HijackAnnouncement& h) {
        for (auto& hj : hijacks_) {
            if (hj.ann.attacker == h.attacker && hj.ann.prefix == h.prefix &&
                hj.ann.t_start == h.t_start && hj.ann.t_end > now_) {
                hj.ann.t_end = now_;
                log(now_, hosts_.at(h.attacker).name, h.prefix.str(), "hijack.withdraw", "");
            }
        }
    }

    // Route chosen for `dst` at the current time, as a host id. Longest match
    // wins; equal lengths go to the higher preference, then to insertion order.
    std::optional<HostId> lookup(Ipv4Addr dst,
                                 std::optional<HostId> ignore_hijacks_of = std::nullopt) const {
        std::optional<HostId> best;
        int best_len = -1;
        int best_pref = 0;
        long best_order = 0;
        auto consider = [&](const Prefix& p, HostId host, int pref, long order) {
            if (!p.contains(dst)) return;
            bool better = int(p.length) > best_len ||
                          (int(p.length) == best_len && pref > best_pref) ||
                          (int(p.length) == best_len && pref == best_pref &&
                           order < best_order);
            if (better) {
                best = host;
                best_len = p.length;
                best_pref = pref;
                best_order = order;
            }
        };
        for (const auto& r : routes_) consider(r.prefix, r.host, r.preference, long(r.order));
        for (const auto& hj : hijacks_) {
            if (!hj.accepted) continue;
            if (now_ < hj.ann.t_start || now_ >= hj.ann.t_end) continue;
            if (ignore_hijacks_of && hj.ann.attacker == *ignore_hijacks_of) continue;
            consider(hj.ann.prefix, hj.ann.attacker, hj.preference, long(hj.order));
        }
        return best;
    }

    // --- log ----------------------------------------------------------------

    void set_log_mode(LogMode m) { log_mode_ = m; }

    void log(double t, const std::string& src, const std::string& dst, const std::string& kind,
             const std::string& detail) {
        if (log_mode_ == LogMode::Off) return;
        LogRecord rec{t, src, dst, kind, detail};
        digest_ = fnv1a64(rec.line() + "\n", digest_);
        if (log_mode_ == LogMode::Full) log_.push_back(std::move(rec));
    }

    void note(const std::string& who, const std::string& kind, const std::string& detail) {
        log(now_, who, "-", kind, detail);
    }

    const std::vector<LogRecord>& log_records() const { return log_; }
    uint64_t log_digest() const { return digest_; }

    Rng& rng() { return root_rng_; }
    Rng split_rng(const std::string& label) { return root_rng_.split(label); }

private:
    struct Host {
        std::string name;
        std::vector<Ipv4Addr> ips;
        bool bcp38;
        std::function<void(const Ipv4Packet&)> handler;
    };
    struct Route {
        Prefix prefix;
        HostId host;
        int preference;
        size_t order;
    };
    struct Hijack {
        HijackAnnouncement ann;
        bool accepted = false;
        int preference = 0;
        size_t order = 0;
    };
    struct Event {
        double time;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Event& o) const {
            return time != o.time ? time > o.time : seq > o.seq;
        }
    };

    double latency(HostId a, HostId b) const {
        auto it = links_.find(std::minmax(a, b));
        return it == links_.end() ? default_latency_ : it->second;
    }

    std::vector<Host> hosts_;
    std::vector<Route> routes_;
    std::vector<Hijack> hijacks_;
    std::map<std::pair<HostId, HostId>, double> links_;
    double default_latency_ = 0.01;
    double loss_probability_ = 0.0;
    double latency_jitter_ = 0.0;
    double same_prefix_acceptance_ = 0.6;

    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    uint64_t seq_ = 0;
    double now_ = 0;
    uint64_t packets_sent_ = 0;

    std::vector<LogRecord> log_;
    uint64_t digest_ = 0xcbf29ce484222325ull;
    LogMode log_mode_ = LogMode::Full;

    Rng root_rng_;
    Rng route_rng_;
};

} // namespace dnslab
