#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dnslab/resolver.hpp"
#include "dnslab/simnet.hpp"

namespace dnslab {

enum class RecoveryDetail { Email, Username, Handle, SecurityQuestion, TwoFactor };

inline const char* detail_name(RecoveryDetail d) {
    switch (d) {
        case RecoveryDetail::Email: return "email";
        case RecoveryDetail::Username: return "username";
        case RecoveryDetail::Handle: return "handle";
        case RecoveryDetail::SecurityQuestion: return "security_question";
        case RecoveryDetail::TwoFactor: return "2fa";
    }
    return "?";
}

inline RecoveryDetail detail_from_name(const std::string& s) {
    if (s == "email") return RecoveryDetail::Email;
    if (s == "username") return RecoveryDetail::Username;
    if (s == "handle") return RecoveryDetail::Handle;
    if (s == "security_question") return RecoveryDetail::SecurityQuestion;
    if (s == "2fa") return RecoveryDetail::TwoFactor;
    throw ParseError("unknown recovery detail: " + s);
}

struct Account {
    std::string provider;
    std::string username;
    std::string email;  // localpart@domain
    std::set<RecoveryDetail> required_details;
    std::string secret = "initial-password";
    std::string notification_email;
    std::string hijacked_by;  // empty until a non-owner resets the secret

    std::string email_domain() const {
        auto at = email.find('@');
        return at == std::string::npos ? email : email.substr(at + 1);
    }
};

struct LatencyProfile {
    double mean = 0.3;
    double sigma = 0.0;
};

struct ProviderProfile {
    std::string name;
    bool captcha = false;
    LatencyProfile recovery_latency;
    int max_recovery_requests = 10;  // per account
};

struct ResetEmail {
    std::string provider;
    std::string account;
    std::string token;
    Ipv4Addr delivered_to_ip;
    double delivered_at = 0;
};

// Details supplied with a password-recovery request.
struct RecoveryRequest {
    std::map<RecoveryDetail, std::string> details;
    bool human_solver = false;  // a person solving the captcha; recorded as cost
};

// Resource-provider model: accounts, the password-recovery workflow, and the
// reset-token lifecycle. Recovery resolves MX then A through the provider's
// resolver and hands the token to whichever host owns the resulting address.
class ProviderModel {
public:
    using DeliveryHook = std::function<void(const ResetEmail&)>;

    ProviderModel(Sim& sim, ProviderProfile profile, ResolverModel& resolver)
        : sim_(&sim),
          profile_(std::move(profile)),
          resolver_(&resolver),
          rng_(sim.split_rng("provider/" + profile_.name)) {}

    const ProviderProfile& profile() const { return profile_; }

    void add_account(Account a) { accounts_[a.username] = std::move(a); }
    Account* account(const std::string& username) {
        auto it = accounts_.find(username);
        return it == accounts_.end() ? nullptr : &it->second;
    }

    // Called when a reset email lands on a host; keyed by owner host id so the
    // attacker and the genuine mail host each see only their own deliveries.
    void set_delivery_hook(HostId owner, DeliveryHook hook) {
        delivery_hooks_[owner] = std::move(hook);
    }

    uint64_t captcha_solves() const { return captcha_solves_; }
    const std::vector<ResetEmail>& deliveries() const { return deliveries_; }
    const std::vector<double>& trigger_times() const { return trigger_times_; }

    // Async recovery: checks the supplied details, then after the provider's
    // internal latency resolves MX(domain) and A(mx target) and delivers the
    // reset token to the resolved address.
    void trigger_password_recovery(const std::string& username, const RecoveryRequest& req) {
        double now = sim_->now();
        Account* acc = account(username);
        if (!acc) throw DetailsMismatch("no such account: " + username);
        for (RecoveryDetail d : acc->required_details) {
            auto it = req.details.find(d);
            bool ok = it != req.details.end();
            if (ok) {
                switch (d) {
                    case RecoveryDetail::Email: ok = it->second == acc->email; break;
                    case RecoveryDetail::Username: ok = it->second == acc->username; break;
                    default: break;  // handle/security question/2fa: presence is the model
                }
            }
            if (!ok)
                throw DetailsMismatch(std::string("missing or wrong detail: ") + detail_name(d));
        }
        if (profile_.captcha) {
            if (!req.human_solver) throw CaptchaBlocked(profile_.name + " uses a captcha");
            ++captcha_solves_;
            sim_->log(now, profile_.name, username, "recovery.captcha", "solved manually");
        }
        int& used = recovery_counts_[username];
        if (used >= profile_.max_recovery_requests)
            throw TooManyRequests(username + " exceeded " +
                                  std::to_string(profile_.max_recovery_requests));
        ++used;

        trigger_times_.push_back(now);
        sim_->log(now, profile_.name, username, "recovery.trigger",
                  "request " + std::to_string(used));

        double latency = sample_latency();
        std::string domain = acc->email_domain();
        std::string account_name = acc->username;
        sim_->after(latency, [this, domain, account_name]() {
            resolver_->resolve(domain, RrType::MX, [this, domain, account_name](
                                                       const ResolveResult& mx) {
                if (!mx.ok || mx.records.empty()) {
                    sim_->log(sim_->now(), profile_.name, domain, "recovery.fail", "MX lookup");
                    return;
                }
                const auto& target = std::get<MxData>(mx.records.front().rdata).target;
                resolver_->resolve(target, RrType::A, [this, account_name, target](
                                                          const ResolveResult& a) {
                    if (!a.ok || a.records.empty()) {
                        sim_->log(sim_->now(), profile_.name, target, "recovery.fail",
                                  "A lookup");
                        return;
                    }
                    deliver(account_name, std::get<Ipv4Addr>(a.records.front().rdata));
                });
            });
        });
    }

    // Consumes a token. The account is marked hijacked when the actor is not
    // the account owner; what happens with the hijacked account afterwards is
    // out of frame, the flag is the terminal outcome.
    void reset_password(const std::string& token, const std::string& new_secret,
                        const std::string& actor) {
        auto it = tokens_.find(token);
        if (it == tokens_.end() || it->second.used) throw InvalidToken("bad or used token");
        it->second.used = true;
        Account* acc = account(it->second.account);
        if (!acc) throw InvalidToken("token for unknown account");
        acc->secret = new_secret;
        if (actor != acc->username) acc->hijacked_by = actor;
        sim_->log(sim_->now(), profile_.name, acc->username, "recovery.reset",
                  "by " + actor + (acc->hijacked_by.empty() ? "" : " HIJACKED"));
    }

    bool hijacked(const std::string& username) {
        Account* acc = account(username);
        return acc && !acc->hijacked_by.empty();
    }

    // Token lookup for whoever received the email (the delivery hook hands the
    // ResetEmail struct over; this is just a convenience for tests).
    std::optional<ResetEmail> last_delivery_to(Ipv4Addr ip) const {
        for (auto it = deliveries_.rbegin(); it != deliveries_.rend(); ++it)
            if (it->delivered_to_ip == ip) return *it;
        return std::nullopt;
    }

private:
    double sample_latency() {
        double l = rng_.normal(profile_.recovery_latency.mean, profile_.recovery_latency.sigma);
        return l < 0 ? 0 : l;
    }

    void deliver(const std::string& account_name, Ipv4Addr ip) {
        ResetEmail mail;
        mail.provider = profile_.name;
        mail.account = account_name;
        mail.token = "tok-" + std::to_string(next_token_++) + "-" + hex_u64(rng_.next_u64());
        mail.delivered_to_ip = ip;
        mail.delivered_at = sim_->now();
        tokens_[mail.token] = TokenInfo{account_name, false};
        deliveries_.push_back(mail);
        sim_->log(sim_->now(), profile_.name, ip.str(), "email.reset",
                  "account " + account_name + " token " + mail.token);
        if (auto owner = sim_->owner_of(ip)) {
            auto it = delivery_hooks_.find(*owner);
            if (it != delivery_hooks_.end()) it->second(mail);
        }
    }

    struct TokenInfo {
        std::string account;
        bool used = false;
    };

    Sim* sim_;
    ProviderProfile profile_;
    ResolverModel* resolver_;
    Rng rng_;
    std::map<std::string, Account> accounts_;
    std::map<std::string, int> recovery_counts_;
    std::map<std::string, TokenInfo> tokens_;
    std::map<HostId, DeliveryHook> delivery_hooks_;
    std::vector<ResetEmail> deliveries_;
    std::vector<double> trigger_times_;
    uint64_t captcha_solves_ = 0;
    uint64_t next_token_ = 1;
};

// Mean/sigma over samples after dropping outliers beyond one initial sigma.
struct LatencyStats {
    double mean = 0;
    double sigma = 0;
    size_t kept = 0;
    size_t dropped = 0;

    bool window_open(double limit = 15.0) const { return mean + sigma < limit; }
};

inline LatencyStats latency_stats(const std::vector<double>& samples) {
    LatencyStats st;
    if (samples.empty()) return st;
    double m0 = 0;
    for (double s : samples) m0 += s;
    m0 /= double(samples.size());
    double v0 = 0;
    for (double s : samples) v0 += (s - m0) * (s - m0);
    double s0 = std::sqrt(v0 / double(samples.size()));
    bool degenerate = s0 < 1e-9;  // below timing resolution, nothing is an outlier

    std::vector<double> kept;
    for (double s : samples)
        if (degenerate || std::fabs(s - m0) <= s0) kept.push_back(s);
    st.dropped = samples.size() - kept.size();
    st.kept = kept.size();
    if (kept.empty()) return st;
    for (double s : kept) st.mean += s;
    st.mean /= double(kept.size());
    double v = 0;
    for (double s : kept) v += (s - st.mean) * (s - st.mean);
    st.sigma = std::sqrt(v / double(kept.size()));
    return st;
}

// Runs n recovery trials against a measurement account and reports the
// trigger-to-first-query latency distribution seen at the nameserver.
// `query_times` must come from the nameserver that served the lookups.
inline LatencyStats measure_recovery_latency(const std::vector<double>& trigger_times,
                                             const std::vector<double>& query_times) {
    std::vector<double> samples;
    size_t qi = 0;
    for (double t : trigger_times) {
        while (qi < query_times.size() && query_times[qi] < t) ++qi;
        if (qi == query_times.size()) break;
        samples.push_back(query_times[qi] - t);
        ++qi;
    }
    return latency_stats(samples);
}

} // namespace dnslab
