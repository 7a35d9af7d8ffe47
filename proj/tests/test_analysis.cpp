#include <catch2/catch_amalgamated.hpp>

#include "dnslab/analysis.hpp"
#include "dnslab/nameserver.hpp"

using namespace dnslab;

namespace {

struct ProbeRig {
    Sim sim{41};
    HostId ns_host;
    std::unique_ptr<NameserverModel> ns;
    Ipv4Addr probers[2] = {Ipv4Addr::parse("50.0.0.1"), Ipv4Addr::parse("51.0.0.1")};
    double t = 0.0;
    double dt = 0.5;
    int probe_count = 0;

    ProbeRig(IpidStrategy s, ResponsePolicy p, int mx_records = 1) {
        ns_host = sim.add_host("ns1", {Ipv4Addr::parse("123.0.0.53")});
        Zone z;
        z.origin = "example.info";
        for (int i = 0; i < mx_records; ++i)
            z.records.push_back(ResourceRecord::mx(
                "example.info", uint16_t(10 * (i + 1)), "mx" + std::to_string(i) + ".example.info"));
        ns = std::make_unique<NameserverModel>(sim, ns_host, z, s, p);
    }

    ProbeFn probe_fn() {
        return [this](int prober) -> std::optional<ProbeObservation> {
            ++probe_count;
            Ipv4Packet q = make_udp_packet(probers[prober], Ipv4Addr::parse("123.0.0.53"),
                                           uint16_t(10000 + probe_count), 53,
                                           make_query(uint16_t(probe_count), "example.info",
                                                      RrType::MX, 4096)
                                               .encode(),
                                           1);
            t += dt;
            auto out = ns->handle_query(q, t);
            if (out.empty()) return std::nullopt;
            ProbeObservation obs;
            obs.ipid = out[0].header.ipid;
            obs.time = t;
            obs.answer_bytes =
                DnsMessage::decode(udp_payload_view(out[0])).answer_section_bytes();
            return obs;
        };
    }
};

} // namespace

TEST_CASE("stable server reports one distinct response after two batches") {
    ProbeRig rig(IpidStrategy{}, ResponsePolicy{});
    auto rep = algorithm1_predictability(rig.probe_fn(), "example.info", "123.0.0.53");
    CHECK(rep.distinct_response_count == 1);
    CHECK(rep.batches_used == 2);
    CHECK(rig.probe_count == 8);
}

TEST_CASE("three rotating answer sets are counted as three") {
    ResponsePolicy p;
    p.record_set_rotation = 3;
    ProbeRig rig(IpidStrategy{}, p, 3);
    auto rep = algorithm1_predictability(rig.probe_fn(), "example.info", "123.0.0.53");
    CHECK(rep.distinct_response_count == 3);
}

TEST_CASE("predictability probing stays within 25 batches and 100 requests") {
    ResponsePolicy p;
    p.ordering = ResponsePolicy::Ordering::Shuffled;
    ProbeRig rig(IpidStrategy{}, p, 4);  // 24 permutations keep new variants coming
    auto rep = algorithm1_predictability(rig.probe_fn(), "example.info", "123.0.0.53");
    CHECK(rep.batches_used <= 25);
    CHECK(rig.probe_count <= 100);
    CHECK(rep.distinct_response_count >= 2);
}

TEST_CASE("a 62%-stable cohort reports 62% single-response domains") {
    int stable_count = 0;
    for (int i = 0; i < 100; ++i) {
        bool stable = i < 62;
        ResponsePolicy p;
        p.record_set_rotation = stable ? 1 : 3;
        ProbeRig rig(IpidStrategy{}, p, 3);
        auto rep = algorithm1_predictability(rig.probe_fn(), "d" + std::to_string(i), "ns");
        if (rep.distinct_response_count == 1) ++stable_count;
    }
    CHECK(stable_count == 62);
}

TEST_CASE("ipid classifier labels all four strategies") {
    auto classify = [](IpidStrategy::Kind kind, double background) {
        IpidStrategy s;
        s.kind = kind;
        s.start = 7;
        s.background_rate = background;
        ProbeRig rig(s, ResponsePolicy{});
        return algorithm2_ipid(rig.probe_fn());
    };
    CHECK(classify(IpidStrategy::Kind::GlobalIncrementing, 0).label ==
          IpidClassification::Label::Global);
    CHECK(classify(IpidStrategy::Kind::GlobalIncrementing, 50).label ==
          IpidClassification::Label::Global);
    CHECK(classify(IpidStrategy::Kind::PerDestination, 0).label ==
          IpidClassification::Label::PerDest);
    CHECK(classify(IpidStrategy::Kind::Zero, 0).label == IpidClassification::Label::Zero);
    CHECK(classify(IpidStrategy::Kind::Random, 0).label ==
          IpidClassification::Label::RandomOther);
}

TEST_CASE("muted server classifies as n_a") {
    IpidStrategy s;
    ResponsePolicy p;
    p.muted = true;
    ProbeRig rig(s, p);
    CHECK(algorithm2_ipid(rig.probe_fn()).label == IpidClassification::Label::NA);
}

TEST_CASE("estimated increment rate tracks probe plus background traffic") {
    IpidStrategy s;
    s.kind = IpidStrategy::Kind::GlobalIncrementing;
    s.background_rate = 20.0;
    ProbeRig rig(s, ResponsePolicy{});
    auto cls = algorithm2_ipid(rig.probe_fn());
    REQUIRE(cls.label == IpidClassification::Label::Global);
    // Probes themselves add 2 ids/sec on top of the 20/sec background.
    CHECK(cls.increment_rate > 12.0);
    CHECK(cls.increment_rate < 32.0);
}

TEST_CASE("zero allocation is hit with certainty, random with 64 over 2^16") {
    IpidClassification zero;
    zero.label = IpidClassification::Label::Zero;
    CHECK(ipid_hit_probability(zero, 0, 0) == 1.0);

    IpidClassification rnd;
    rnd.label = IpidClassification::Label::RandomOther;
    CHECK_THAT(ipid_hit_probability(rnd, 0, 0),
               Catch::Matchers::WithinRel(64.0 / 65536.0, 1e-12));
}

TEST_CASE("poisson closed form matches a monte-carlo oracle within half a percent") {
    IpidClassification global;
    global.label = IpidClassification::Label::Global;
    struct Case {
        double rate, delay;
    } cases[] = {{2.0, 1.0}, {40.0, 1.0}, {100.0, 1.5}, {0.0, 1.0}};
    Rng rng(4242);
    for (const auto& c : cases) {
        double closed = ipid_hit_probability(global, c.rate, c.delay, 64);
        double mu = c.rate * c.delay;
        uint64_t s = optimal_window_start(mu, 64);
        int hits = 0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            uint64_t drift = rng.poisson(mu);
            if (drift >= s && drift < s + 64) ++hits;
        }
        double mc = double(hits) / n;
        CHECK_THAT(closed, Catch::Matchers::WithinAbs(mc, 0.005));
    }
}

TEST_CASE("quiet incrementing server is predicted exactly") {
    IpidClassification global;
    global.label = IpidClassification::Label::Global;
    CHECK(ipid_hit_probability(global, 0.0, 5.0, 64) == 1.0);
    CHECK(optimal_window_start(0.0, 64) == 0);
}

TEST_CASE("combined hit rate multiplies ipid and checksum factors") {
    CHECK(checksum_probability(1) == 1.0);
    CHECK_THAT(checksum_probability(3), Catch::Matchers::WithinRel(1.0 / 3.0, 1e-12));
    CHECK(checksum_probability(1 << 20) == 1.0 / 65536.0);  // capped at the blind guess

    auto m = combined_hitrate(1.0, 1);
    CHECK(m.combined == 1.0);
    auto m2 = combined_hitrate(64.0 / 65536.0, 1);
    CHECK(m2.combined > 0.0009);  // the stable-records random-ipid cohort
    auto m3 = combined_hitrate(0.5, 4);
    CHECK_THAT(m3.combined, Catch::Matchers::WithinRel(0.125, 1e-12));
    CHECK(m3.combined <= m3.ipid_hit_prob);
    CHECK(m3.combined <= m3.checksum_prob);
}

TEST_CASE("repetition count satisfies the crossing inequalities") {
    struct Case {
        double target, hitrate;
    } cases[] = {{0.5, 64.0 / 65536.0}, {0.5, 0.01}, {0.9, 0.001}, {0.5, 0.6}, {0.99, 0.5}};
    for (const auto& c : cases) {
        uint64_t n = repetitions_for(c.target, c.hitrate);
        double at_n = 1.0 - std::pow(1.0 - c.hitrate, double(n));
        double at_prev = 1.0 - std::pow(1.0 - c.hitrate, double(n - 1));
        CHECK(at_n >= c.target);
        CHECK(at_prev < c.target);
    }
    // The 64/2^16 crossing sits at 709.44, so the smallest satisfying count
    // is 710 ("around 700").
    CHECK(repetitions_for(0.5, 64.0 / 65536.0) == 710);
    CHECK(repetitions_for(0.5, 1.0) == 1);
    CHECK_THROWS_AS(repetitions_for(0.5, 0.0), Error);
}

TEST_CASE("sub-prefix exposure follows the longest advertised match") {
    std::vector<Prefix> adv{Prefix::parse("10.0.0.0/22")};
    CHECK(classify_subprefix_vulnerability(adv, Ipv4Addr::parse("10.0.1.5")));

    std::vector<Prefix> adv24{Prefix::parse("10.0.0.0/24")};
    CHECK_FALSE(classify_subprefix_vulnerability(adv24, Ipv4Addr::parse("10.0.0.5")));

    std::vector<Prefix> both{Prefix::parse("10.0.0.0/20"), Prefix::parse("10.0.0.0/24")};
    CHECK_FALSE(classify_subprefix_vulnerability(both, Ipv4Addr::parse("10.0.0.5")));
    // The /20 still governs addresses outside the /24.
    CHECK(classify_subprefix_vulnerability(both, Ipv4Addr::parse("10.0.8.1")));

    CHECK_FALSE(classify_subprefix_vulnerability(adv24, Ipv4Addr::parse("99.0.0.1")));
}

TEST_CASE("cdf of a single datum steps to one") {
    auto cdf = make_cdf({296.0});
    REQUIRE(cdf.size() == 1);
    CHECK(cdf[0].value == 296.0);
    CHECK(cdf[0].fraction == 1.0);
}

TEST_CASE("mtu cohort reads 0.10 at 68 and 0.35 at 296") {
    // 10% coerced to 68, another 25% to 296, the rest only to 548.
    std::vector<double> cohort;
    for (int i = 0; i < 10; ++i) cohort.push_back(68);
    for (int i = 0; i < 25; ++i) cohort.push_back(296);
    for (int i = 0; i < 65; ++i) cohort.push_back(548);
    auto cdf = make_cdf(cohort);
    REQUIRE(cdf.size() == 3);
    CHECK_THAT(cdf[0].fraction, Catch::Matchers::WithinRel(0.10, 1e-12));
    CHECK(cdf[0].value == 68);
    CHECK_THAT(cdf[1].fraction, Catch::Matchers::WithinRel(0.35, 1e-12));
    CHECK(cdf[1].value == 296);
    CHECK(cdf[2].fraction == 1.0);
}

TEST_CASE("cdf columns are monotone and end at one") {
    Rng rng(5);
    std::vector<double> samples;
    for (int i = 0; i < 500; ++i) samples.push_back(rng.uniform01() * 100);
    auto cdf = make_cdf(samples);
    for (size_t i = 1; i < cdf.size(); ++i) {
        CHECK(cdf[i].value > cdf[i - 1].value);
        CHECK(cdf[i].fraction > cdf[i - 1].fraction);
    }
    CHECK(cdf.back().fraction == 1.0);

    auto rcdf = make_reverse_cdf(samples);
    for (size_t i = 1; i < rcdf.size(); ++i) {
        CHECK(rcdf[i].value < rcdf[i - 1].value);
        CHECK(rcdf[i].fraction > rcdf[i - 1].fraction);
    }
    CHECK(rcdf.back().fraction == 1.0);
}
