#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dnslab/bytes.hpp"
#include "dnslab/ip.hpp"

namespace dnslab {

// One probe response as seen by a measurement client: the answer-section wire
// bytes (response identity), the IPID of the carrying packet, and when it
// arrived. Probes go through a pluggable transport so the same algorithms run
// against the simulation or live sockets.
struct ProbeObservation {
    Bytes answer_bytes;
    uint16_t ipid = 0;
    double time = 0;
};

// probe(prober_index) -> observation; index selects the source address (the
// IPID classifier needs two).
using ProbeFn = std::function<std::optional<ProbeObservation>(int)>;

struct PredictabilityReport {
    std::string domain;
    std::string nameserver;
    size_t distinct_response_count = 0;
    int batches_used = 0;
    bool responded = false;
};

// Batches of four identical requests, up to 25 batches, stopping on the first
// batch that adds no previously unseen response. Identity is exact byte
// equality of the answer-section encoding (records and their order).
inline PredictabilityReport algorithm1_predictability(const ProbeFn& probe,
                                                      const std::string& domain,
                                                      const std::string& nameserver) {
    PredictabilityReport rep;
    rep.domain = domain;
    rep.nameserver = nameserver;
    std::set<Bytes> seen;
    for (int batch = 1; batch <= 25; ++batch) {
        rep.batches_used = batch;
        bool new_response = false;
        for (int i = 0; i < 4; ++i) {
            auto obs = probe(0);
            if (!obs) continue;
            rep.responded = true;
            if (seen.insert(obs->answer_bytes).second) new_response = true;
        }
        if (!new_response) break;
    }
    rep.distinct_response_count = seen.size();
    return rep;
}

struct IpidClassification {
    enum class Label { Global, PerDest, Zero, RandomOther, NA };
    Label label = Label::NA;
    double increment_rate = 0;  // ids/second, incrementing labels only

    const char* label_name() const {
        switch (label) {
            case Label::Global: return "global";
            case Label::PerDest: return "per_dest";
            case Label::Zero: return "zero";
            case Label::RandomOther: return "random_other";
            case Label::NA: return "n_a";
        }
        return "?";
    }
};

namespace detail {
// Incrementing with 16-bit wraparound; gaps above the tolerance break the run.
inline bool is_incrementing(const std::vector<uint16_t>& v, uint16_t gap_tolerance) {
    for (size_t i = 1; i < v.size(); ++i) {
        uint16_t d = static_cast<uint16_t>(v[i] - v[i - 1]);
        if (d < 1 || d > gap_tolerance) return false;
    }
    return true;
}
} // namespace detail

// Four alternating rounds from two probing addresses give IPID_1..8; the
// sequence shape separates global, per-destination, zero and everything else.
// A fully incrementing interleaved sequence is classified global even though
// it also satisfies the per-destination test. The increment rate comes from
// the same eight samples and their timestamps.
inline IpidClassification algorithm2_ipid(const ProbeFn& probe, uint16_t gap_tolerance = 1000) {
    std::vector<uint16_t> ipids;
    std::vector<double> times;
    for (int batch = 0; batch < 4; ++batch) {
        for (int prober = 0; prober < 2; ++prober) {
            auto obs = probe(prober);
            if (!obs) return IpidClassification{};  // n_a
            ipids.push_back(obs->ipid);
            times.push_back(obs->time);
        }
    }
    IpidClassification out;
    std::vector<uint16_t> odd, even;
    for (size_t i = 0; i < 8; i += 2) odd.push_back(ipids[i]);
    for (size_t i = 1; i < 8; i += 2) even.push_back(ipids[i]);

    auto span_rate = [&](const std::vector<uint16_t>& seq, double t0, double t1) {
        if (t1 <= t0) return 0.0;
        uint32_t total = 0;
        for (size_t i = 1; i < seq.size(); ++i)
            total += static_cast<uint16_t>(seq[i] - seq[i - 1]);
        return double(total) / (t1 - t0);
    };

    if (detail::is_incrementing(ipids, gap_tolerance)) {
        out.label = IpidClassification::Label::Global;
        out.increment_rate = span_rate(ipids, times.front(), times.back());
        return out;
    }
    if (detail::is_incrementing(odd, gap_tolerance) ||
        detail::is_incrementing(even, gap_tolerance)) {
        out.label = IpidClassification::Label::PerDest;
        bool use_odd = detail::is_incrementing(odd, gap_tolerance);
        const auto& seq = use_odd ? odd : even;
        out.increment_rate = span_rate(seq, times[use_odd ? 0 : 1], times[use_odd ? 6 : 7]);
        return out;
    }
    bool all_zero = true;
    for (uint16_t v : ipids) all_zero &= (v == 0);
    out.label = all_zero ? IpidClassification::Label::Zero
                         : IpidClassification::Label::RandomOther;
    return out;
}

// --- IPID prediction ---------------------------------------------------------

inline double poisson_pmf(uint64_t k, double mu) {
    if (mu <= 0) return k == 0 ? 1.0 : 0.0;
    return std::exp(double(k) * std::log(mu) - mu - std::lgamma(double(k) + 1.0));
}

// Start offset (relative to the observed IPID + 1) of the `guesses`-wide
// window that maximises the Poisson hit mass for drift mu = rate * delay.
inline uint64_t optimal_window_start(double mu, unsigned guesses) {
    if (mu <= 0) return 0;
    uint64_t best_s = 0;
    double best = -1;
    uint64_t hi = static_cast<uint64_t>(std::ceil(mu)) + 1;
    for (uint64_t s = 0; s <= hi; ++s) {
        double mass = 0;
        for (uint64_t k = s; k < s + guesses; ++k) mass += poisson_pmf(k, mu);
        if (mass > best + 1e-15) {
            best = mass;
            best_s = s;
        }
    }
    return best_s;
}

// Probability that one of `guesses` planted fragments carries the IPID the
// nameserver assigns to the victim response. Incrementing allocations follow
// the Poisson drift model; random allocation is a blind guess over 2^16;
// a zero allocation is hit with certainty by guessing zero.
inline double ipid_hit_probability(const IpidClassification& cls, double rate, double delay,
                                   unsigned guesses = 64) {
    if (guesses > 64) guesses = 64;  // defragmentation cache bound
    switch (cls.label) {
        case IpidClassification::Label::Zero:
            return 1.0;
        case IpidClassification::Label::RandomOther:
        case IpidClassification::Label::NA:
            return double(guesses) / 65536.0;
        case IpidClassification::Label::Global:
        case IpidClassification::Label::PerDest: {
            double mu = rate * delay;
            uint64_t s = optimal_window_start(mu, guesses);
            double mass = 0;
            for (uint64_t k = s; k < s + guesses; ++k) mass += poisson_pmf(k, mu);
            return std::min(1.0, mass);
        }
    }
    return 0.0;
}

// --- combined hit rate and repetitions ----------------------------------------

struct HitRateModel {
    double ipid_hit_prob = 0;
    double checksum_prob = 1;
    double combined = 0;
    unsigned fragments = 64;
    double delay = 0;
    double rate = 0;
};

// Responses with a single observed variant pin the checksum; otherwise the
// guess over variants is capped below by the blind 1/2^16.
inline double checksum_probability(size_t distinct_response_count) {
    if (distinct_response_count <= 1) return 1.0;
    return std::max(1.0 / double(distinct_response_count), 1.0 / 65536.0);
}

inline HitRateModel combined_hitrate(double ipid_p, size_t distinct_response_count,
                                     unsigned fragments = 64, double delay = 0,
                                     double rate = 0) {
    HitRateModel m;
    m.ipid_hit_prob = ipid_p;
    m.checksum_prob = checksum_probability(distinct_response_count);
    m.combined = ipid_p * m.checksum_prob;
    m.fragments = fragments;
    m.delay = delay;
    m.rate = rate;
    return m;
}

// Smallest n with 1-(1-hitrate)^n >= target.
inline uint64_t repetitions_for(double target, double hitrate) {
    if (hitrate <= 0 || hitrate > 1) throw Error("hitrate must be in (0, 1]");
    if (target <= 0) return 0;
    if (target >= 1 || hitrate == 1.0) {
        if (hitrate == 1.0) return 1;
        throw Error("target 1 unreachable for hitrate < 1");
    }
    double n = std::log1p(-target) / std::log1p(-hitrate);
    auto r = static_cast<uint64_t>(std::ceil(n - 1e-12));
    return r == 0 ? 1 : r;
}

// --- sub-prefix exposure -------------------------------------------------------

// An address is exposed to sub-prefix interception when its covering
// announcement is less specific than /24: a more specific forged announcement
// can still propagate. Longest announced match governs.
inline bool classify_subprefix_vulnerability(const std::vector<Prefix>& advertised,
                                             Ipv4Addr ip) {
    int best_len = -1;
    for (const auto& p : advertised)
        if (p.contains(ip)) best_len = std::max(best_len, int(p.length));
    return best_len >= 0 && best_len < 24;
}

// --- CDF output -----------------------------------------------------------------

struct CdfPoint {
    double value;
    double fraction;
};

// Fraction of samples <= value, one row per distinct value; ends at 1.
inline std::vector<CdfPoint> make_cdf(std::vector<double> samples) {
    std::vector<CdfPoint> out;
    if (samples.empty()) return out;
    std::sort(samples.begin(), samples.end());
    size_t n = samples.size();
    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n && samples[i + 1] == samples[i]) continue;
        out.push_back(CdfPoint{samples[i], double(i + 1) / double(n)});
    }
    return out;
}

// Fraction of samples >= value, rows ordered by descending value so the
// fraction column is nondecreasing and terminates at 1.
inline std::vector<CdfPoint> make_reverse_cdf(std::vector<double> samples) {
    std::vector<CdfPoint> out;
    if (samples.empty()) return out;
    std::sort(samples.begin(), samples.end(), std::greater<>());
    size_t n = samples.size();
    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n && samples[i + 1] == samples[i]) continue;
        out.push_back(CdfPoint{samples[i], double(i + 1) / double(n)});
    }
    return out;
}

} // namespace dnslab
