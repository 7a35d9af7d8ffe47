#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "dnslab/scenario.hpp"

namespace dnslab {

namespace fs = std::filesystem;

struct RunReport {
    std::string scenario;
    uint64_t seed = 0;
    std::string profile;
    bool has_attack = false;
    AttackOutcome outcome;
    bool cache_confirmed = false;
    std::vector<std::string> cache_dump;
    bool account_hijacked = false;
    std::optional<LatencyStats> latency;
    uint64_t log_digest = 0;
    uint64_t report_digest = 0;
    std::vector<std::string> artifacts;

    json to_json() const {
        json j;
        j["scenario"] = scenario;
        j["seed"] = seed;
        j["profile"] = profile;
        if (has_attack) {
            j["outcome"] = {{"success", outcome.success},
                            {"failure", outcome.failure},
                            {"queries_triggered", outcome.queries_triggered},
                            {"packets_sent", outcome.packets_sent},
                            {"wall_time", outcome.wall_time},
                            {"poisoned_record", outcome.poisoned_record},
                            {"email_intercepted", outcome.email_intercepted},
                            {"iterations", outcome.iterations},
                            {"cache_confirmed", cache_confirmed},
                            {"account_hijacked", account_hijacked}};
        }
        j["cache_dump"] = cache_dump;
        if (latency) {
            j["latency"] = {{"mean", latency->mean},
                            {"sigma", latency->sigma},
                            {"kept", latency->kept},
                            {"dropped", latency->dropped},
                            {"window_open", latency->window_open()}};
        }
        j["log_digest"] = hex_u64(log_digest);
        j["report_digest"] = hex_u64(report_digest);
        j["artifacts"] = artifacts;
        return j;
    }
};

namespace runner_detail {

inline void compute_report_digest(RunReport& rep) {
    uint64_t d = fnv1a64(rep.scenario);
    d = fnv1a64(std::to_string(rep.seed), d);
    d = fnv1a64(rep.profile, d);
    if (rep.has_attack) {
        d = fnv1a64(std::string(rep.outcome.success ? "success" : "fail"), d);
        d = fnv1a64(rep.outcome.failure, d);
        d = fnv1a64(std::to_string(rep.outcome.queries_triggered), d);
        d = fnv1a64(std::to_string(rep.outcome.packets_sent), d);
        d = fnv1a64(rep.outcome.poisoned_record, d);
    }
    for (const auto& line : rep.cache_dump) d = fnv1a64(line, d);
    d = fnv1a64(hex_u64(rep.log_digest), d);
    rep.report_digest = d;
}

// Measurement accounts live in per-trial subdomains so every recovery causes
// a fresh nameserver lookup instead of a cache hit.
inline void install_latency_measurement(World& world, const MeasurementSpec& spec,
                                        const std::string& domain, Ipv4Addr mail_ip) {
    auto pit = world.providers.find(spec.provider);
    if (pit == world.providers.end())
        throw SchemaError("measure_latency.provider", "unknown provider " + spec.provider);
    ProviderModel* provider = pit->second.get();
    for (int i = 0; i < spec.trials; ++i) {
        std::string sub = "m" + std::to_string(i) + "." + canonical_name(domain);
        for (auto* ns : world.zone_servers(domain)) {
            ns->zone().records.push_back(ResourceRecord::mx(sub, 10, "mail." + sub));
            ns->zone().records.push_back(ResourceRecord::a("mail." + sub, mail_ip));
        }
        Account acc;
        acc.provider = spec.provider;
        acc.username = "measure-" + std::to_string(i);
        acc.email = "probe@" + sub;
        acc.required_details = {RecoveryDetail::Email};
        provider->add_account(acc);
    }
    for (int i = 0; i < spec.trials; ++i) {
        std::string sub = "m" + std::to_string(i) + "." + canonical_name(domain);
        std::string user = "measure-" + std::to_string(i);
        world.sim->at(double(i) * spec.spacing, [provider, user, sub]() {
            RecoveryRequest req;
            req.details[RecoveryDetail::Email] = "probe@" + sub;
            try {
                provider->trigger_password_recovery(user, req);
            } catch (const Error&) {
            }
        });
    }
}

} // namespace runner_detail

// Runs one scenario to completion: world construction, the scheduled attack,
// cache-dump confirmation of the outcome, optional latency measurement, and
// artifact emission (events.log, report.json, fig2_latency.csv).
inline RunReport simulate(const Scenario& sc, const std::string& out_dir,
                          std::optional<uint64_t> seed_override = std::nullopt,
                          Sim::LogMode log_mode = Sim::LogMode::Full) {
    auto world = build_world(sc, seed_override);
    Sim& sim = *world->sim;
    sim.set_log_mode(log_mode);

    RunReport rep;
    rep.scenario = sc.name;
    rep.seed = seed_override.value_or(sc.seed);
    rep.profile = sc.profile;

    std::string measured_domain;
    if (world->measurement) {
        // The measured domain is the victim domain when an attack is present,
        // else the domain of the provider's first account zone.
        measured_domain = world->has_attack
                              ? world->plan.victim_domain
                              : scenario_detail::field<std::string>(
                                    sc.raw.at("measure_latency"), "domain", "measure_latency");
        Ipv4Addr mail_ip(10, 99, 99, 99);
        for (auto* ns : world->zone_servers(measured_domain))
            for (const auto& rr : ns->zone().records)
                if (rr.rrtype == RrType::A) mail_ip = std::get<Ipv4Addr>(rr.rdata);
        runner_detail::install_latency_measurement(*world, *world->measurement, measured_domain,
                                                   mail_ip);
    }

    if (world->has_attack) {
        sim.run_until(world->attack_start);
        rep.has_attack = true;
        rep.outcome = run_attack(*world->attacker, world->plan);

        // The attacker follows a delivered reset email with the actual
        // account takeover when the scenario granted the reset form.
        if (world->attacker->reset) {
            for (const auto& mail : world->attacker->mailbox)
                if (mail.delivered_to_ip == world->plan.poison_ip)
                    world->attacker->reset(mail.token, "attacker-chosen-secret");
        }
    }

    sim.run_until(sc.duration);

    if (world->has_attack) {
        ResolverModel* victim = world->resolver(world->attack_resolver_host);
        rep.cache_confirmed =
            victim && victim->cache_maps(world->plan.mail_host, RrType::A,
                                         world->plan.poison_ip.str());
        // A success claim must be backed by the victim cache (or, for
        // provider-side MX injection, by the intercepted email).
        if (rep.outcome.success && !(rep.cache_confirmed || rep.outcome.email_intercepted))
            rep.outcome.success = false;
        if (victim) rep.cache_dump = victim->dump_cache();
        for (auto& [pname, provider] : world->providers) {
            for (const auto& a : sc.raw.value("providers", json::array())) {
                for (const auto& acc : a.value("accounts", json::array())) {
                    std::string user = acc.value("username", "");
                    if (!user.empty() && provider->hijacked(user)) rep.account_hijacked = true;
                }
            }
        }
    } else if (!world->resolvers.empty()) {
        rep.cache_dump = world->resolvers.begin()->second->dump_cache();
    }

    if (world->measurement) {
        std::vector<double> query_times;
        for (auto* ns : world->zone_servers(measured_domain))
            for (double t : ns->query_times()) query_times.push_back(t);
        std::sort(query_times.begin(), query_times.end());
        auto pit = world->providers.find(world->measurement->provider);
        if (pit != world->providers.end())
            rep.latency = measure_recovery_latency(pit->second->trigger_times(), query_times);
    }

    rep.log_digest = sim.log_digest();
    runner_detail::compute_report_digest(rep);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        if (log_mode == Sim::LogMode::Full) {
            std::ofstream ev(fs::path(out_dir) / "events.log");
            for (const auto& rec : sim.log_records()) ev << rec.line() << "\n";
            rep.artifacts.push_back((fs::path(out_dir) / "events.log").string());
        }
        if (rep.latency) {
            std::ofstream csv(fs::path(out_dir) / "fig2_latency.csv");
            csv << "provider,mean_s,sigma_s,kept,dropped\n";
            csv << world->measurement->provider << "," << rep.latency->mean << ","
                << rep.latency->sigma << "," << rep.latency->kept << ","
                << rep.latency->dropped << "\n";
            rep.artifacts.push_back((fs::path(out_dir) / "fig2_latency.csv").string());
        }
        std::ofstream rj(fs::path(out_dir) / "report.json");
        rj << rep.to_json().dump(2) << "\n";
        rep.artifacts.push_back((fs::path(out_dir) / "report.json").string());
    }
    return rep;
}

// --- probe mode ---------------------------------------------------------------

struct ProbeRow {
    std::string target;
    std::string check;
    std::string result;

    std::string line() const { return target + " | " + check + " | " + result; }
};

namespace runner_detail {

// Prober host injected into the scenario world: two source addresses (the
// IPID classifier needs both) and an inbox.
struct ProbeRig {
    Sim* sim;
    HostId host;
    Ipv4Addr ip0, ip1;
    std::deque<Ipv4Packet> inbox;
    uint32_t next_port = 20001;
    std::vector<Ipv4Addr> audited_destinations;

    explicit ProbeRig(World& world)
        : sim(world.sim.get()), ip0(Ipv4Addr::parse("198.18.0.1")),
          ip1(Ipv4Addr::parse("198.18.1.1")) {
        host = sim->add_host("prober", {ip0, ip1});
        sim->add_route(Prefix::parse("198.18.0.0/15"), host);
        sim->set_handler(host, [this](const Ipv4Packet& p) { inbox.push_back(p); });
    }

    // One DNS query from the chosen source; returns the observation (first
    // fragment's IPID, the reassembled answer bytes and arrival time).
    std::optional<ProbeObservation> query(Ipv4Addr ns, const std::string& qname, RrType qtype,
                                          int prober) {
        audited_destinations.push_back(ns);
        inbox.clear();
        uint16_t sport = static_cast<uint16_t>(20000 + (next_port++ % 40000));
        DnsMessage q = make_query(static_cast<uint16_t>(next_port), qname, qtype, 4096);
        sim->send(host, make_udp_packet(prober == 0 ? ip0 : ip1, ns, sport, 53, q.encode(), 1));
        sim->run_until(sim->now() + 0.3);

        std::vector<Ipv4Packet> frags;
        for (const auto& p : inbox)
            if (p.header.protocol == kProtoUdp && p.header.src == ns) frags.push_back(p);
        if (frags.empty()) return std::nullopt;
        std::sort(frags.begin(), frags.end(), [](const auto& a, const auto& b) {
            return a.header.fragment_offset < b.header.fragment_offset;
        });
        ProbeObservation obs;
        obs.ipid = frags[0].header.ipid;
        obs.time = sim->now();
        Bytes datagram;
        for (const auto& f : frags) datagram.insert(datagram.end(), f.payload.begin(),
                                                    f.payload.end());
        try {
            obs.answer_bytes = DnsMessage::decode(ByteView(datagram).subspan(8))
                                   .answer_section_bytes();
        } catch (const std::exception&) {
            return std::nullopt;
        }
        return obs;
    }

    void send_ptb(Ipv4Addr ns, Ipv4Addr for_dst, uint16_t mtu) {
        audited_destinations.push_back(ns);
        Ipv4Packet quoted = make_udp_packet(ns, for_dst, 53, 33000, Bytes(8, 0), 1);
        sim->send(host, make_icmp_packet(ip0, ns, make_ptb(quoted, mtu)));
        sim->run_until(sim->now() + 0.05);
    }

    size_t icmp_count() const {
        size_t n = 0;
        for (const auto& p : inbox)
            if (p.header.protocol == kProtoIcmp) ++n;
        return n;
    }
};

inline std::string check_ns_fragmentation(ProbeRig& rig, Ipv4Addr ns, const std::string& qname) {
    std::vector<uint16_t> accepted;
    for (uint16_t mtu : {1280, 576, 296, 68}) {
        rig.send_ptb(ns, rig.ip0, mtu);
        rig.inbox.clear();
        DnsMessage q = make_query(7, qname, RrType::MX, 4096);
        rig.sim->send(rig.host,
                      make_udp_packet(rig.ip0, ns, static_cast<uint16_t>(21000 + mtu), 53,
                                      q.encode(), 1));
        rig.sim->run_until(rig.sim->now() + 0.3);
        size_t frag_count = 0;
        bool within = true;
        for (const auto& p : rig.inbox)
            if (p.header.protocol == kProtoUdp && p.header.src == ns) {
                ++frag_count;
                within &= p.total_length() <= mtu;
            }
        if (frag_count >= 2 && within) accepted.push_back(mtu);
    }
    if (accepted.empty()) return "no fragmentation";
    std::string out = "fragments at";
    for (uint16_t m : accepted) out += " " + std::to_string(m);
    return out;
}

// Fragment acceptance of a resolver: serve a probe zone from the prober's own
// nameserver, coerce its PMTU toward the resolver, and watch whether the
// resolver chases the CNAME in the fragmented response. A follow-up query at
// the probe nameserver means the fragments were reassembled and accepted.
inline std::string check_resolver_fragments(World& world, ResolverModel& resolver) {
    Sim& sim = *world.sim;
    static int rig_counter = 0;
    std::string suffix = std::to_string(rig_counter++);
    Ipv4Addr ns_ip = Ipv4Addr(198, 19, 0, uint8_t(10 + rig_counter));
    HostId ns_host = sim.add_host("probe-ns-" + suffix, {ns_ip});
    sim.add_route(Prefix::make(ns_ip, 32), ns_host);

    Zone zone;
    zone.origin = "probe" + suffix + ".test";
    ResponsePolicy policy;
    policy.pad_to = 1600;  // responses always exceed the probed MTUs
    std::vector<uint16_t> mtus{1280, 576, 296, 68};
    for (uint16_t mtu : mtus) {
        std::string step = "m" + std::to_string(mtu) + "." + zone.origin;
        zone.records.push_back(ResourceRecord::cname(step, "ok-" + std::to_string(mtu) + "." +
                                                               zone.origin));
        zone.records.push_back(
            ResourceRecord::a("ok-" + std::to_string(mtu) + "." + zone.origin,
                              Ipv4Addr(198, 19, 1, 1)));
    }
    auto ns = std::make_unique<NameserverModel>(sim, ns_host, zone, IpidStrategy{}, policy);
    ns->attach();
    resolver.add_zone(ResolverModel::ZoneInfo{zone.origin, {ns_ip}, false, nullptr});

    std::vector<uint16_t> accepted;
    for (uint16_t mtu : mtus) {
        ns->pmtu().store(resolver.ip(), kProtoUdp, mtu, sim.now());
        uint64_t before = ns->queries_seen();
        bool done = false;
        resolver.resolve("m" + std::to_string(mtu) + "." + zone.origin, RrType::A,
                         [&](const ResolveResult&) { done = true; });
        double deadline = sim.now() + 20.0;
        while (!done && sim.now() < deadline) sim.run_until(sim.now() + 0.1);
        // Accepted when the resolver issued the follow-up query for the
        // CNAME target (at least two queries arrived: step + chase).
        if (ns->queries_seen() >= before + 2) accepted.push_back(mtu);
        sim.run_until(sim.now() + 1.0);
    }
    world.nameservers.push_back(
        World::NsEntry{"probe-ns-" + suffix, zone.origin, std::move(ns)});
    if (accepted.empty()) return "no fragments accepted";
    std::string out = "accepts";
    for (uint16_t m : accepted) out += " " + std::to_string(m);
    return out;
}

inline std::string check_resolver_icmp(ProbeRig& rig, Ipv4Addr resolver_ip) {
    Sim& sim = *rig.sim;
    rig.audited_destinations.push_back(resolver_ip);
    rig.inbox.clear();
    sim.send(rig.host, make_udp_packet(rig.ip0, resolver_ip, 40998, 7, Bytes{0}, 1));
    sim.run_until(sim.now() + 0.2);
    bool single = rig.icmp_count() > 0;
    if (!single) return "no icmp errors";

    sim.run_until(sim.now() + 1.2);
    rig.inbox.clear();
    for (int i = 0; i < 50; ++i) {
        Ipv4Addr spoofed(0xcb007100u + uint32_t(i) + 1);
        sim.send(rig.host, make_udp_packet(spoofed, resolver_ip,
                                           static_cast<uint16_t>(41000 + i),
                                           static_cast<uint16_t>(100 + i), Bytes{0}, 1));
    }
    sim.run_until(sim.now() + 0.05);
    rig.inbox.clear();
    sim.send(rig.host, make_udp_packet(rig.ip0, resolver_ip, 40999, 13, Bytes{0}, 1));
    sim.run_until(sim.now() + 0.2);
    bool after_burst = rig.icmp_count() > 0;
    sim.run_until(sim.now() + 1.2);
    return after_burst ? "icmp unlimited" : "global rate-limit present";
}

} // namespace runner_detail

// Runs the selected checks against each target inside the scenario world.
inline std::vector<ProbeRow> probe_sim(const Scenario& sc, const json& targets,
                                       const std::vector<std::string>& checks) {
    auto world = build_world(sc);
    world->sim->set_log_mode(Sim::LogMode::DigestOnly);
    runner_detail::ProbeRig rig(*world);
    std::vector<ProbeRow> rows;

    auto enabled = [&](const std::string& c) {
        return checks.empty() || std::find(checks.begin(), checks.end(), c) != checks.end();
    };

    for (const auto& t : targets.value("targets", json::array())) {
        std::string name = scenario_detail::field<std::string>(t, "name", "targets[]");
        std::string type = scenario_detail::field<std::string>(t, "type", "targets[]");
        std::string host = scenario_detail::field<std::string>(t, "host", "targets[]");
        auto hid = world->sim->host_by_name(host);
        if (!hid) throw SchemaError("targets[].host", "unknown host " + host);

        if (type == "nameserver") {
            std::string domain = scenario_detail::field<std::string>(t, "domain", "targets[]");
            Ipv4Addr ns_ip = world->sim->host_ips(*hid).front();
            if (enabled("fragmentation"))
                rows.push_back(ProbeRow{name, "fragmentation",
                                        runner_detail::check_ns_fragmentation(rig, ns_ip,
                                                                              domain)});
            if (enabled("ipid")) {
                auto probe = [&](int prober) { return rig.query(ns_ip, domain, RrType::MX,
                                                                prober); };
                auto cls = algorithm2_ipid(probe);
                char buf[64];
                std::snprintf(buf, sizeof buf, "%s rate %.2f/s", cls.label_name(),
                              cls.increment_rate);
                rows.push_back(ProbeRow{name, "ipid", buf});
            }
            if (enabled("predictability")) {
                auto probe = [&](int prober) { return rig.query(ns_ip, domain, RrType::MX,
                                                                prober); };
                auto rep = algorithm1_predictability(probe, domain, ns_ip.str());
                rows.push_back(ProbeRow{
                    name, "predictability",
                    rep.responded ? std::to_string(rep.distinct_response_count) +
                                        " distinct responses in " +
                                        std::to_string(rep.batches_used) + " batches"
                                  : "no responses"});
            }
        } else if (type == "resolver") {
            ResolverModel* resolver = world->resolver(host);
            if (!resolver) throw SchemaError("targets[].host", host + " is not a resolver");
            if (enabled("icmp"))
                rows.push_back(ProbeRow{name, "icmp",
                                        runner_detail::check_resolver_icmp(rig, resolver->ip())});
            if (enabled("fragmentation"))
                rows.push_back(ProbeRow{
                    name, "fragmentation",
                    runner_detail::check_resolver_fragments(*world, *resolver)});
        } else {
            throw SchemaError("targets[].type", "must be nameserver or resolver");
        }
    }
    return rows;
}

// --- sweep mode -----------------------------------------------------------------

struct SweepRow {
    std::string point;
    uint64_t trials = 0;
    uint64_t successes = 0;
    double rate = 0;
    double ci_lo = 0;
    double ci_hi = 0;
};

namespace runner_detail {

inline void finish_ci(SweepRow& row) {
    row.rate = row.trials ? double(row.successes) / double(row.trials) : 0;
    double se = row.trials ? std::sqrt(std::max(row.rate * (1 - row.rate), 1e-12) /
                                       double(row.trials))
                           : 0;
    row.ci_lo = std::max(0.0, row.rate - 1.96 * se);
    row.ci_hi = std::min(1.0, row.rate + 1.96 * se);
}

inline IpidStrategy::Kind ipid_kind_from(const std::string& s) {
    if (s == "global") return IpidStrategy::Kind::GlobalIncrementing;
    if (s == "per_dest") return IpidStrategy::Kind::PerDestination;
    if (s == "random") return IpidStrategy::Kind::Random;
    if (s == "zero") return IpidStrategy::Kind::Zero;
    throw SchemaError("sweep.grid[].ipid", "unknown kind " + s);
}

// FragDNS window trials against the real defragmentation machinery, fanned
// out over worker threads with per-chunk derived seeds.
inline SweepRow sweep_fragdns_point(const json& point, uint64_t trials, uint64_t seed,
                                    unsigned threads) {
    std::string kind = point.value("ipid", "random");
    double rate = point.value("rate", 0.0);
    double delay = point.value("delay", 1.0);
    unsigned guesses = point.value("guesses", 64u);
    double predict_delay = point.value("window_at_delay", delay);

    // Shared fragment pair template (content does not affect the IPID draw).
    std::string qname = "mail.victim-corp.test";
    std::vector<ResourceRecord> answers{ResourceRecord::a(qname, Ipv4Addr(1, 2, 3, 4))};
    DnsMessage m;
    m.txid = 7;
    m.qr = m.aa = true;
    m.question.push_back(Question{qname, RrType::A, kClassIn});
    m.answers = answers;
    m.additional.push_back(ResourceRecord::opt(4096));
    Ipv4Packet whole = make_udp_packet(Ipv4Addr(123, 0, 0, 53), Ipv4Addr(30, 0, 0, 1), 53,
                                       40000, m.encode(), 0);
    auto frags = fragment(whole, 68);
    Ipv4Packet spoof = craft_spoofed_second_fragment(
        frags[0], frags[1], {ResourceRecord::a(qname, Ipv4Addr(6, 6, 6, 6))}, 0);
    spoof.header.dst = Ipv4Addr(30, 0, 0, 1);

    SweepRow row;
    row.point = "ipid=" + kind + " rate=" + std::to_string(rate) +
                " delay=" + std::to_string(delay) + " guesses=" + std::to_string(guesses);
    row.trials = trials;

    unsigned workers = std::max(1u, threads);
    std::vector<uint64_t> hits(workers, 0);
    std::vector<std::thread> pool;
    uint64_t per = trials / workers;
    for (unsigned w = 0; w < workers; ++w) {
        uint64_t n = w + 1 == workers ? trials - per * w : per;
        pool.emplace_back([&, w, n]() {
            Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (w + 1)));
            uint64_t local = 0;
            for (uint64_t i = 0; i < n; ++i) {
                IpidStrategy strat;
                strat.kind = ipid_kind_from(kind);
                strat.background_rate = rate;
                strat.start = static_cast<uint16_t>(rng.uniform_u16());
                strat.seed_counters();
                uint16_t window_start;
                if (strat.kind == IpidStrategy::Kind::GlobalIncrementing ||
                    strat.kind == IpidStrategy::Kind::PerDestination) {
                    uint16_t observed = strat.next(spoof.header.dst, 0.0, rng);
                    uint64_t skip = optimal_window_start(rate * predict_delay, guesses);
                    window_start = static_cast<uint16_t>(observed + 1 + skip);
                } else if (strat.kind == IpidStrategy::Kind::Zero) {
                    window_start = 0;
                } else {
                    window_start = rng.uniform_u16();
                }
                if (fragdns_window_trial(strat, rng, frags[0], spoof, guesses, window_start,
                                         delay))
                    ++local;
            }
            hits[w] = local;
        });
    }
    for (auto& th : pool) th.join();
    for (uint64_t h : hits) row.successes += h;
    finish_ci(row);
    return row;
}

inline SweepRow sweep_hijack_point(const json& point, uint64_t trials, uint64_t seed) {
    double acceptance = point.value("acceptance", 0.6);
    SweepRow row;
    row.point = "same_prefix acceptance=" + std::to_string(acceptance);
    row.trials = trials;

    Sim sim(seed);
    HostId resolver = sim.add_host("resolver", {Ipv4Addr(30, 0, 0, 1)});
    HostId ns = sim.add_host("ns", {Ipv4Addr(123, 0, 0, 53)});
    HostId attacker = sim.add_host("attacker", {Ipv4Addr(6, 6, 6, 6)});
    sim.add_route(Prefix::parse("30.0.0.0/24"), resolver);
    sim.add_route(Prefix::parse("123.0.0.0/22"), ns);
    sim.add_route(Prefix::parse("6.6.6.0/24"), attacker);
    sim.set_same_prefix_acceptance(acceptance);
    sim.set_log_mode(Sim::LogMode::Off);
    std::vector<Ipv4Packet> at_attacker;
    sim.set_handler(attacker, [&](const Ipv4Packet& p) { at_attacker.push_back(p); });

    for (uint64_t i = 0; i < trials; ++i) {
        at_attacker.clear();
        HijackAnnouncement h;
        h.attacker = attacker;
        h.prefix = Prefix::parse("123.0.0.0/22");
        h.kind = HijackAnnouncement::Kind::SamePrefix;
        h.t_start = sim.now();
        h.t_end = sim.now() + 0.5;
        sim.announce(h);
        sim.send(resolver, make_udp_packet(Ipv4Addr(30, 0, 0, 1), Ipv4Addr(123, 0, 0, 53),
                                           uint16_t(1024 + (i % 60000)), 53, Bytes{1}, 1));
        sim.run_until(sim.now() + 1.0);
        if (!at_attacker.empty()) ++row.successes;
    }
    finish_ci(row);
    return row;
}

inline SweepRow sweep_scenario_point(const Scenario& sc, uint64_t trials, uint64_t seed) {
    SweepRow row;
    row.point = "scenario=" + sc.name;
    row.trials = trials;
    for (uint64_t i = 0; i < trials; ++i) {
        uint64_t derived = seed ^ (0x9e3779b97f4a7c15ull * (i + 1));
        RunReport rep = simulate(sc, "", derived, Sim::LogMode::Off);
        if (rep.outcome.success) ++row.successes;
    }
    finish_ci(row);
    return row;
}

} // namespace runner_detail

// Monte-Carlo success-rate sweeps. The grid file chooses the trial kind:
// fragdns_window (IPID/checksum micro-trials), hijack_same_prefix, or
// scenario (full scenario re-runs under derived seeds).
inline std::vector<SweepRow> sweep(const json& grid_spec, const std::optional<Scenario>& sc,
                                   uint64_t seed, unsigned threads = 1) {
    std::string kind = grid_spec.value("kind", "fragdns_window");
    uint64_t trials = grid_spec.value("trials", uint64_t(1000));
    if (trials < 1) throw SchemaError("sweep.trials", "must be >= 1");
    std::vector<SweepRow> rows;
    json grid = grid_spec.value("grid", json::array({json::object()}));
    for (const auto& point : grid) {
        if (kind == "fragdns_window")
            rows.push_back(runner_detail::sweep_fragdns_point(point, trials, seed, threads));
        else if (kind == "hijack_same_prefix")
            rows.push_back(runner_detail::sweep_hijack_point(point, trials, seed));
        else if (kind == "scenario") {
            if (!sc) throw SchemaError("sweep", "scenario kind requires a scenario file");
            rows.push_back(runner_detail::sweep_scenario_point(*sc, trials, seed));
        } else {
            throw SchemaError("sweep.kind", "unknown kind " + kind);
        }
    }
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    out << "point,trials,successes,rate,ci95_lo,ci95_hi\n";
    for (const auto& r : rows)
        out << '"' << r.point << "\"," << r.trials << "," << r.successes << "," << r.rate << ","
            << r.ci_lo << "," << r.ci_hi << "\n";
}

// CSV emission for the per-figure artifacts.
inline void write_cdf_csv(const std::vector<CdfPoint>& cdf, const std::string& path,
                          const std::string& value_header, const std::string& frac_header) {
    std::ofstream out(path);
    out << value_header << "," << frac_header << "\n";
    for (const auto& p : cdf) out << p.value << "," << p.fraction << "\n";
}

// Cohort-level measurement results feeding the CSV artifacts.
struct CohortReports {
    std::vector<std::pair<std::string, LatencyStats>> latencies;  // per provider
    std::vector<double> lowest_mtu;            // per nameserver, smallest accepted size
    std::vector<double> distinct_responses;    // per (domain, nameserver)
    std::vector<double> ipid_hit_rates;        // per domain, combined ipid hit probability
};

// Writes fig2_latency.csv, fig3_mtu_cdf.csv, fig4_responses_cdf.csv and
// fig5_ipid_hitrate.csv for whichever sections are populated. Returns the
// paths written.
inline std::vector<std::string> emit_cdfs(const CohortReports& reports,
                                          const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    if (!reports.latencies.empty()) {
        std::string path = (fs::path(out_dir) / "fig2_latency.csv").string();
        std::ofstream out(path);
        out << "provider,mean_s,sigma_s,kept,dropped\n";
        for (const auto& [name, st] : reports.latencies)
            out << name << "," << st.mean << "," << st.sigma << "," << st.kept << ","
                << st.dropped << "\n";
        written.push_back(path);
    }
    if (!reports.lowest_mtu.empty()) {
        std::string path = (fs::path(out_dir) / "fig3_mtu_cdf.csv").string();
        write_cdf_csv(make_cdf(reports.lowest_mtu), path, "fragment_size", "fraction_le");
        written.push_back(path);
    }
    if (!reports.distinct_responses.empty()) {
        std::string path = (fs::path(out_dir) / "fig4_responses_cdf.csv").string();
        write_cdf_csv(make_cdf(reports.distinct_responses), path, "distinct_responses",
                      "fraction_le");
        written.push_back(path);
    }
    if (!reports.ipid_hit_rates.empty()) {
        std::string path = (fs::path(out_dir) / "fig5_ipid_hitrate.csv").string();
        write_cdf_csv(make_reverse_cdf(reports.ipid_hit_rates), path, "hit_rate",
                      "fraction_ge");
        written.push_back(path);
    }
    return written;
}

// Folds probe rows into cohort vectors: lowest accepted fragment size,
// distinct response counts, and an IPID hit-rate estimate per target using
// the drift model at `delay` seconds.
inline CohortReports aggregate_probe_rows(const std::vector<ProbeRow>& rows,
                                          double delay = 1.0) {
    CohortReports agg;
    std::map<std::string, size_t> distinct_by_target;
    for (const auto& r : rows) {
        if (r.check == "fragmentation" && r.result.rfind("fragments at", 0) == 0) {
            double lowest = 0;
            std::istringstream ss(r.result);
            std::string tok;
            while (ss >> tok) {
                try {
                    double v = std::stod(tok);
                    lowest = lowest == 0 ? v : std::min(lowest, v);
                } catch (...) {
                }
            }
            if (lowest > 0) agg.lowest_mtu.push_back(lowest);
        } else if (r.check == "predictability") {
            try {
                agg.distinct_responses.push_back(std::stod(r.result));
                distinct_by_target[r.target] = size_t(std::stod(r.result));
            } catch (...) {
            }
        }
    }
    for (const auto& r : rows) {
        if (r.check != "ipid") continue;
        IpidClassification cls;
        std::istringstream ss(r.result);
        std::string label, ratek;
        double rate = 0;
        ss >> label >> ratek >> rate;
        if (label == "global")
            cls.label = IpidClassification::Label::Global;
        else if (label == "per_dest")
            cls.label = IpidClassification::Label::PerDest;
        else if (label == "zero")
            cls.label = IpidClassification::Label::Zero;
        else if (label == "n_a")
            cls.label = IpidClassification::Label::NA;
        else
            cls.label = IpidClassification::Label::RandomOther;
        cls.increment_rate = rate;
        double ipid_p = ipid_hit_probability(cls, rate, delay, 64);
        size_t distinct = 1;
        auto it = distinct_by_target.find(r.target);
        if (it != distinct_by_target.end()) distinct = it->second;
        agg.ipid_hit_rates.push_back(combined_hitrate(ipid_p, distinct).combined);
    }
    return agg;
}

} // namespace dnslab
