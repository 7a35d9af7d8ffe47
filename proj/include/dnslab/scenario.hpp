#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnslab/attacker.hpp"
#include "dnslab/nameserver.hpp"
#include "dnslab/provider.hpp"
#include "dnslab/resolver.hpp"
#include "dnslab/simnet.hpp"

namespace dnslab {

using json = nlohmann::json;

// Parsed scenario plus the constructed simulation world. The scenario file is
// the single source of topology, zone content, behavioural profiles, the
// attack plan and the seed; (file, seed) fully determines a run.
struct Scenario {
    std::string name;
    uint64_t seed = 0;
    double duration = 60.0;
    std::string profile = "rfc791";  // rfc791: 15 s reassembly, linux: 30 s

    json raw;

    static double profile_timeout(const std::string& p) {
        return p == "linux" ? 30.0 : 15.0;
    }
};

struct MeasurementSpec {
    std::string provider;
    int trials = 0;
    double spacing = 10.0;
};

class World {
public:
    std::unique_ptr<Sim> sim;
    std::map<std::string, HostId> hosts;

    struct NsEntry {
        std::string host_name;
        std::string origin;
        std::unique_ptr<NameserverModel> model;
    };
    std::vector<NsEntry> nameservers;
    std::map<std::string, std::unique_ptr<ResolverModel>> resolvers;  // by host name
    std::map<std::string, std::unique_ptr<ProviderModel>> providers;  // by provider name
    std::unique_ptr<AttackerView> attacker;

    bool has_attack = false;
    AttackPlan plan;
    double attack_start = 0;
    std::string attack_resolver_host;  // whose cache confirms success

    std::optional<MeasurementSpec> measurement;

    std::vector<NameserverModel*> zone_servers(const std::string& origin) {
        std::vector<NameserverModel*> out;
        for (auto& e : nameservers)
            if (canonical_name(e.origin) == canonical_name(origin)) out.push_back(e.model.get());
        return out;
    }

    ResolverModel* resolver(const std::string& host_name) {
        auto it = resolvers.find(host_name);
        return it == resolvers.end() ? nullptr : it->second.get();
    }
};

namespace scenario_detail {

template <typename T>
T field(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key)) throw SchemaError(ctx + "." + key, "missing required field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(ctx + "." + key, e.what());
    }
}

template <typename T>
T field_or(const json& j, const std::string& key, const T& fallback, const std::string& ctx) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(ctx + "." + key, e.what());
    }
}

inline Ipv4Addr ip_field(const json& j, const std::string& key, const std::string& ctx) {
    try {
        return Ipv4Addr::parse(field<std::string>(j, key, ctx));
    } catch (const ParseError& e) {
        throw SchemaError(ctx + "." + key, e.what());
    }
}

inline ResourceRecord parse_record(const json& j, const std::string& ctx) {
    std::string name = field<std::string>(j, "name", ctx);
    std::string type = field<std::string>(j, "type", ctx);
    uint32_t ttl = field_or<uint32_t>(j, "ttl", 300, ctx);
    if (type == "A") return ResourceRecord::a(name, ip_field(j, "address", ctx), ttl);
    if (type == "MX")
        return ResourceRecord::mx(name, field_or<uint16_t>(j, "preference", 10, ctx),
                                  field<std::string>(j, "target", ctx), ttl);
    if (type == "NS") return ResourceRecord::ns(name, field<std::string>(j, "target", ctx), ttl);
    if (type == "CNAME")
        return ResourceRecord::cname(name, field<std::string>(j, "target", ctx), ttl);
    if (type == "TXT")
        return ResourceRecord::txt(name, field<std::vector<std::string>>(j, "strings", ctx), ttl);
    throw SchemaError(ctx + ".type", "unknown record type " + type);
}

inline IpidStrategy parse_ipid(const json& j, const std::string& ctx) {
    IpidStrategy s;
    std::string kind = field_or<std::string>(j, "kind", "global", ctx);
    if (kind == "global")
        s.kind = IpidStrategy::Kind::GlobalIncrementing;
    else if (kind == "per_dest")
        s.kind = IpidStrategy::Kind::PerDestination;
    else if (kind == "random")
        s.kind = IpidStrategy::Kind::Random;
    else if (kind == "zero")
        s.kind = IpidStrategy::Kind::Zero;
    else
        throw SchemaError(ctx + ".kind", "unknown ipid kind " + kind);
    s.start = field_or<uint16_t>(j, "start", 0, ctx);
    s.background_rate = field_or<double>(j, "background_rate", 0.0, ctx);
    return s;
}

inline ResponsePolicy parse_policy(const json& j, const std::string& ctx) {
    ResponsePolicy p;
    std::string ordering = field_or<std::string>(j, "ordering", "stable", ctx);
    if (ordering == "stable")
        p.ordering = ResponsePolicy::Ordering::Stable;
    else if (ordering == "shuffled")
        p.ordering = ResponsePolicy::Ordering::Shuffled;
    else
        throw SchemaError(ctx + ".ordering", "must be stable or shuffled");
    p.record_set_rotation = field_or<uint32_t>(j, "rotation", 1, ctx);
    if (p.record_set_rotation < 1) throw SchemaError(ctx + ".rotation", "must be >= 1");
    if (j.contains("rate_limit") && !j.at("rate_limit").is_null())
        p.rate_limit = field<double>(j, "rate_limit", ctx);
    p.muted = field_or<bool>(j, "muted", false, ctx);
    p.pad_to = field_or<uint16_t>(j, "pad_to", 0, ctx);
    p.edns_size = field_or<uint16_t>(j, "edns", 4096, ctx);
    return p;
}

inline ResolverConfig parse_resolver_config(const json& j, const std::string& ctx,
                                            double reassembly_timeout) {
    ResolverConfig c;
    c.dnssec_validate = field_or<bool>(j, "dnssec_validate", false, ctx);
    std::string tm = field_or<std::string>(j, "timeout_mode", "fixed", ctx);
    if (tm == "fixed")
        c.timeout_mode = ResolverConfig::TimeoutMode::Fixed;
    else if (tm == "rtt_dynamic")
        c.timeout_mode = ResolverConfig::TimeoutMode::RttDynamic;
    else
        throw SchemaError(ctx + ".timeout_mode", "must be fixed or rtt_dynamic");
    c.fixed_timeout = field_or<double>(j, "fixed_timeout", 0.8, ctx);
    c.max_retries = field_or<int>(j, "max_retries", 2, ctx);
    c.edns_size = field_or<uint16_t>(j, "edns_size", 4096, ctx);
    c.accepts_fragments = field_or<bool>(j, "accepts_fragments", true, ctx);
    c.port_min = field_or<uint16_t>(j, "port_min", 1024, ctx);
    c.port_max = field_or<uint16_t>(j, "port_max", 65535, ctx);
    if (c.port_min > c.port_max) throw SchemaError(ctx + ".port_min", "port range is empty");
    std::string icmp = field_or<std::string>(j, "icmp", "global_limited", ctx);
    if (icmp == "none")
        c.icmp_mode = ResolverConfig::IcmpMode::None;
    else if (icmp == "unlimited")
        c.icmp_mode = ResolverConfig::IcmpMode::Unlimited;
    else if (icmp == "global_limited")
        c.icmp_mode = ResolverConfig::IcmpMode::GlobalLimited;
    else
        throw SchemaError(ctx + ".icmp", "must be none, unlimited or global_limited");
    c.icmp_limit = field_or<size_t>(j, "icmp_limit", 50, ctx);
    c.reassembly_timeout = reassembly_timeout;
    c.reassembly_capacity = field_or<size_t>(j, "reassembly_capacity", 64, ctx);
    c.rate_guard_max = field_or<int>(j, "rate_guard_max", 2, ctx);
    return c;
}

} // namespace scenario_detail

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path, "cannot open scenario file");
    Scenario sc;
    try {
        sc.raw = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path, e.what());  // carries byte offset diagnostics
    }
    using namespace scenario_detail;
    sc.name = field<std::string>(sc.raw, "name", "scenario");
    if (!sc.raw.contains("seed")) throw SchemaError("scenario.seed", "seed is mandatory");
    sc.seed = field<uint64_t>(sc.raw, "seed", "scenario");
    sc.duration = field_or<double>(sc.raw, "duration", 60.0, "scenario");
    sc.profile = field_or<std::string>(sc.raw, "profile", "rfc791", "scenario");
    if (sc.profile != "rfc791" && sc.profile != "linux")
        throw SchemaError("scenario.profile", "must be rfc791 or linux");
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    Scenario sc;
    try {
        sc.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("scenario", e.what());
    }
    using namespace scenario_detail;
    sc.name = field<std::string>(sc.raw, "name", "scenario");
    if (!sc.raw.contains("seed")) throw SchemaError("scenario.seed", "seed is mandatory");
    sc.seed = field<uint64_t>(sc.raw, "seed", "scenario");
    sc.duration = field_or<double>(sc.raw, "duration", 60.0, "scenario");
    sc.profile = field_or<std::string>(sc.raw, "profile", "rfc791", "scenario");
    if (sc.profile != "rfc791" && sc.profile != "linux")
        throw SchemaError("scenario.profile", "must be rfc791 or linux");
    return sc;
}

// Builds the simulation world a scenario describes. `seed_override` lets
// sweeps re-run one scenario under derived seeds.
inline std::unique_ptr<World> build_world(const Scenario& sc,
                                          std::optional<uint64_t> seed_override = std::nullopt) {
    using namespace scenario_detail;
    const json& j = sc.raw;
    auto world = std::make_unique<World>();
    uint64_t seed = seed_override.value_or(sc.seed);
    world->sim = std::make_unique<Sim>(seed);
    Sim& sim = *world->sim;
    double reassembly_timeout = Scenario::profile_timeout(sc.profile);

    sim.set_default_latency(field_or<double>(j, "default_latency", 0.01, "scenario"));
    sim.set_loss_probability(field_or<double>(j, "loss_probability", 0.0, "scenario"));
    sim.set_latency_jitter(field_or<double>(j, "latency_jitter", 0.0, "scenario"));
    sim.set_same_prefix_acceptance(
        field_or<double>(j, "same_prefix_acceptance", 0.6, "scenario"));

    if (!j.contains("hosts") || !j.at("hosts").is_array() || j.at("hosts").empty())
        throw SchemaError("scenario.hosts", "at least one host required");
    for (const auto& h : j.at("hosts")) {
        std::string name = field<std::string>(h, "name", "hosts[]");
        std::vector<Ipv4Addr> ips;
        for (const auto& ip : field<std::vector<std::string>>(h, "ips", "hosts[]"))
            ips.push_back(Ipv4Addr::parse(ip));
        if (ips.empty()) throw SchemaError("hosts[].ips", name + " needs an address");
        if (world->hosts.count(name)) throw SchemaError("hosts[].name", name + " duplicated");
        world->hosts[name] = sim.add_host(name, ips, field_or<bool>(h, "bcp38", false, "hosts[]"));
    }

    auto host_id = [&](const std::string& name, const std::string& ctx) -> HostId {
        auto it = world->hosts.find(name);
        if (it == world->hosts.end()) throw SchemaError(ctx, "unknown host " + name);
        return it->second;
    };

    for (const auto& l : j.value("links", json::array())) {
        sim.add_link(host_id(field<std::string>(l, "a", "links[]"), "links[].a"),
                     host_id(field<std::string>(l, "b", "links[]"), "links[].b"),
                     field<double>(l, "latency", "links[]"));
    }

    if (!j.contains("routes") || j.at("routes").empty())
        throw SchemaError("scenario.routes", "route table required");
    for (const auto& r : j.at("routes")) {
        Prefix p;
        try {
            p = Prefix::parse(field<std::string>(r, "prefix", "routes[]"));
        } catch (const ParseError& e) {
            throw SchemaError("routes[].prefix", e.what());
        }
        sim.add_route(p, host_id(field<std::string>(r, "host", "routes[]"), "routes[].host"),
                      field_or<int>(r, "preference", 100, "routes[]"));
    }

    // Every host address must be routable.
    for (const auto& [name, id] : world->hosts)
        for (auto ip : sim.host_ips(id))
            if (!sim.lookup(ip))
                throw SchemaError("routes", "no route covers " + name + " at " + ip.str());

    // Zones and their serving nameservers (one model per serving host).
    for (const auto& z : j.value("zones", json::array())) {
        Zone zone;
        zone.origin = field<std::string>(z, "origin", "zones[]");
        zone.signed_zone = field_or<bool>(z, "signed", false, "zones[]");
        for (const auto& rec : z.value("records", json::array()))
            zone.records.push_back(parse_record(rec, "zones[].records[]"));
        IpidStrategy ipid = parse_ipid(z.value("ipid", json::object()), "zones[].ipid");
        ResponsePolicy policy = parse_policy(z.value("policy", json::object()), "zones[].policy");
        auto ns_names = field<std::vector<std::string>>(z, "nameservers", "zones[]");
        if (ns_names.empty()) throw SchemaError("zones[].nameservers", "zone needs a nameserver");
        for (const auto& ns_name : ns_names) {
            HostId h = host_id(ns_name, "zones[].nameservers");
            auto model = std::make_unique<NameserverModel>(sim, h, zone, ipid, policy);
            model->set_honor_ptb(field_or<bool>(z, "honor_ptb", true, "zones[]"));
            model->attach();
            world->nameservers.push_back(
                World::NsEntry{ns_name, zone.origin, std::move(model)});
        }
    }

    // Resolvers, with zone knowledge and the boolean DNSSEC trust anchors.
    for (const auto& r : j.value("resolvers", json::array())) {
        std::string host_name = field<std::string>(r, "host", "resolvers[]");
        HostId h = host_id(host_name, "resolvers[].host");
        ResolverConfig cfg = parse_resolver_config(r.value("config", json::object()),
                                                   "resolvers[].config", reassembly_timeout);
        auto model = std::make_unique<ResolverModel>(sim, h, cfg);
        model->attach();
        for (const auto& z : j.value("zones", json::array())) {
            ResolverModel::ZoneInfo zi;
            zi.domain = field<std::string>(z, "origin", "zones[]");
            zi.signed_zone = field_or<bool>(z, "signed", false, "zones[]");
            for (const auto& ns_name : field<std::vector<std::string>>(z, "nameservers", "zones[]"))
                zi.nameservers.push_back(sim.host_ips(host_id(ns_name, "zones[]")).front());
            std::string origin = zi.domain;
            World* wptr = world.get();
            zi.genuine = [wptr, origin](const ResourceRecord& rr) {
                for (auto* ns : wptr->zone_servers(origin))
                    if (ns->zone().contains_record(rr)) return true;
                return false;
            };
            model->add_zone(std::move(zi));
        }
        world->resolvers[host_name] = std::move(model);
    }

    // Providers with their accounts.
    for (const auto& p : j.value("providers", json::array())) {
        ProviderProfile prof;
        prof.name = field<std::string>(p, "name", "providers[]");
        prof.captcha = field_or<bool>(p, "captcha", false, "providers[]");
        prof.max_recovery_requests = field_or<int>(p, "max_recovery", 10, "providers[]");
        if (p.contains("latency")) {
            prof.recovery_latency.mean =
                field_or<double>(p.at("latency"), "mean", 0.3, "providers[].latency");
            prof.recovery_latency.sigma =
                field_or<double>(p.at("latency"), "sigma", 0.0, "providers[].latency");
        }
        std::string resolver_host = field<std::string>(p, "resolver", "providers[]");
        ResolverModel* res = world->resolver(resolver_host);
        if (!res) throw SchemaError("providers[].resolver", "unknown resolver " + resolver_host);
        auto model = std::make_unique<ProviderModel>(sim, prof, *res);
        for (const auto& a : p.value("accounts", json::array())) {
            Account acc;
            acc.provider = prof.name;
            acc.username = field<std::string>(a, "username", "providers[].accounts[]");
            acc.email = field<std::string>(a, "email", "providers[].accounts[]");
            for (const auto& d :
                 field_or<std::vector<std::string>>(a, "required", {"email"}, "accounts[]"))
                acc.required_details.insert(detail_from_name(d));
            acc.notification_email = acc.email;
            model->add_account(std::move(acc));
        }
        world->providers[prof.name] = std::move(model);
    }

    // Attack plan and attacker capabilities.
    if (j.contains("attack")) {
        const json& a = j.at("attack");
        world->has_attack = true;
        AttackPlan& plan = world->plan;

        std::string method = field<std::string>(a, "method", "attack");
        if (method == "fragdns")
            plan.method = AttackPlan::Method::FragDns;
        else if (method == "saddns")
            plan.method = AttackPlan::Method::SadDns;
        else if (method == "hijackdns")
            plan.method = AttackPlan::Method::HijackDns;
        else
            throw SchemaError("attack.method", "must be fragdns, saddns or hijackdns");

        std::string target = field_or<std::string>(a, "target", "customer_resolver", "attack");
        if (target == "provider")
            plan.target = AttackPlan::Target::Provider;
        else if (target == "customer_resolver")
            plan.target = AttackPlan::Target::CustomerResolver;
        else
            throw SchemaError("attack.target", "must be provider or customer_resolver");

        std::string attacker_host = field<std::string>(a, "attacker_host", "attack");
        world->attacker = std::make_unique<AttackerView>(
            sim, std::vector<HostId>{host_id(attacker_host, "attack.attacker_host")});
        AttackerView& view = *world->attacker;

        plan.victim_domain = field<std::string>(a, "victim_domain", "attack");
        plan.mail_host = field<std::string>(a, "mail_host", "attack");
        plan.poison_ip = ip_field(a, "poison_ip", "attack");
        world->attack_resolver_host = field<std::string>(a, "resolver", "attack");
        ResolverModel* victim_resolver = world->resolver(world->attack_resolver_host);
        if (!victim_resolver) throw SchemaError("attack.resolver", "unknown resolver");
        plan.resolver_ip = victim_resolver->ip();
        for (auto* ns : world->zone_servers(plan.victim_domain))
            plan.victim_ns.push_back(ns->ip());
        if (plan.victim_ns.empty())
            throw SchemaError("attack.victim_domain", "no nameservers serve this domain");
        plan.repetitions = field_or<unsigned>(a, "repetitions", 1, "attack");
        world->attack_start = field_or<double>(a, "start", 1.0, "attack");

        const json params = a.value("params", json::object());
        plan.ipid_guesses = field_or<unsigned>(params, "ipid_guesses", 64, "attack.params");
        plan.coerce_mtu = field_or<uint16_t>(params, "coerce_mtu", 296, "attack.params");
        plan.estimated_delay = field_or<double>(params, "estimated_delay", 0.2, "attack.params");
        plan.expected_intermediate =
            field_or<unsigned>(params, "expected_intermediate",
                               plan.target == AttackPlan::Target::Provider ? 1 : 0,
                               "attack.params");
        plan.reassembly_window = reassembly_timeout;
        plan.window_estimate = field_or<double>(params, "window_estimate", 50.0, "attack.params");
        plan.sweep_pps = field_or<double>(params, "sweep_pps", 50000.0, "attack.params");
        plan.attacker_mail_host =
            field_or<std::string>(params, "attacker_mail_host", "", "attack.params");
        plan.port_lo = field_or<uint16_t>(params, "port_lo", victim_resolver->config().port_min,
                                          "attack.params");
        plan.port_hi = field_or<uint16_t>(params, "port_hi", victim_resolver->config().port_max,
                                          "attack.params");
        std::string hk = field_or<std::string>(params, "hijack_kind", "sub_prefix",
                                               "attack.params");
        if (hk == "sub_prefix")
            plan.hijack_kind = HijackAnnouncement::Kind::SubPrefix;
        else if (hk == "same_prefix")
            plan.hijack_kind = HijackAnnouncement::Kind::SamePrefix;
        else
            throw SchemaError("attack.params.hijack_kind", "must be sub_prefix or same_prefix");
        if (params.contains("hijack_prefix"))
            plan.hijack_prefix =
                Prefix::parse(field<std::string>(params, "hijack_prefix", "attack.params"));
        plan.hijack_lead = field_or<double>(params, "hijack_lead", 0.05, "attack.params");
        plan.hijack_duration = field_or<double>(params, "hijack_duration", 3.0, "attack.params");
        if (params.contains("hijack_preference") && !params.at("hijack_preference").is_null())
            plan.hijack_preference = field<int>(params, "hijack_preference", "attack.params");

        // Capabilities.
        std::string victim_domain = plan.victim_domain;
        World* wptr = world.get();
        view.mute = [wptr, victim_domain](bool on) {
            for (auto* ns : wptr->zone_servers(victim_domain)) ns->set_muted(on);
        };
        view.announce = [&sim](const HijackAnnouncement& h) { return sim.announce(h); };
        view.withdraw = [&sim](const HijackAnnouncement& h) { sim.withdraw(h); };

        if (plan.target == AttackPlan::Target::CustomerResolver) {
            std::string mail_host = plan.mail_host;
            view.trigger = [victim_resolver, mail_host](
                               std::function<void(const ResolveResult&)> cb) {
                victim_resolver->resolve(mail_host, RrType::A, std::move(cb));
            };
        } else {
            std::string provider_name = field<std::string>(a, "provider", "attack");
            std::string account = field<std::string>(a, "account", "attack");
            auto pit = world->providers.find(provider_name);
            if (pit == world->providers.end())
                throw SchemaError("attack.provider", "unknown provider " + provider_name);
            ProviderModel* provider = pit->second.get();
            RecoveryRequest req;
            const json details = a.value("details", json::object());
            for (const auto& [k, v] : details.items())
                req.details[detail_from_name(k)] = v.get<std::string>();
            req.human_solver = field_or<bool>(a, "human_solver", false, "attack");
            view.trigger = [provider, account, req](
                               std::function<void(const ResolveResult&)> cb) {
                try {
                    provider->trigger_password_recovery(account, req);
                } catch (const Error&) {
                }
                (void)cb;  // recovery outcomes surface through the reset email
            };
            view.reset = [provider](const std::string& token, const std::string& secret) {
                try {
                    provider->reset_password(token, secret, "attacker");
                    return true;
                } catch (const InvalidToken&) {
                    return false;
                }
            };
        }

        // Reset emails reaching attacker-owned addresses land in the mailbox.
        for (auto& [pname, provider] : world->providers) {
            AttackerView* vptr = world->attacker.get();
            provider->set_delivery_hook(host_id(attacker_host, "attack.attacker_host"),
                                        [vptr](const ResetEmail& mail) {
                                            vptr->mailbox.push_back(mail);
                                        });
        }
    }

    if (j.contains("measure_latency")) {
        const json& m = j.at("measure_latency");
        MeasurementSpec spec;
        spec.provider = field<std::string>(m, "provider", "measure_latency");
        spec.trials = field<int>(m, "trials", "measure_latency");
        if (spec.trials < 2) throw SchemaError("measure_latency.trials", "needs at least 2 trials");
        spec.spacing = field_or<double>(m, "spacing", 10.0, "measure_latency");
        world->measurement = spec;
    }

    return world;
}

} // namespace dnslab
