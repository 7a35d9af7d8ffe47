// dnslab: scenario runner for off-path DNS cache-poisoning experiments.
//
// Subcommands:
//   simulate  run a scenario and write the report, event log and CSVs
//   probe     run the measurement checks against scenario targets (or, with
//             explicit consent, against live hosts you own)
//   sweep     Monte-Carlo success-rate grids
//   report    re-print and sanity-check a previous run's report

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "dnslab/runner.hpp"

using namespace dnslab;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t comma = s.find(',', start);
        size_t end = comma == std::string::npos ? s.size() : comma;
        if (end > start) out.push_back(s.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

json load_json_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw SchemaError(what, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(what, e.what());
    }
}

// Live transport: plain DNS-over-UDP queries against explicitly listed hosts.
// The consent list is enforced on every packet; checks that would need raw
// sockets (IPID observation, ICMP crafting, fragment capture) are reported as
// unsupported rather than half-measured.
class LiveDnsProbe {
public:
    LiveDnsProbe(std::set<std::string> consent, double timeout_s)
        : consent_(std::move(consent)), timeout_(timeout_s) {}

    std::optional<ProbeObservation> query(const std::string& address, const std::string& qname,
                                          RrType qtype) {
        if (!consent_.count(address))
            throw ConsentMissing("destination " + address + " is not in the consent list");
        int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd < 0) return std::nullopt;
        struct timeval tv;
        tv.tv_sec = long(timeout_);
        tv.tv_usec = long((timeout_ - double(long(timeout_))) * 1e6);
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);

        sockaddr_in dst{};
        dst.sin_family = AF_INET;
        dst.sin_port = htons(53);
        if (::inet_pton(AF_INET, address.c_str(), &dst.sin_addr) != 1) {
            ::close(fd);
            return std::nullopt;
        }
        DnsMessage q = make_query(static_cast<uint16_t>(++txid_), qname, qtype, 1232);
        Bytes wire = q.encode();
        if (::sendto(fd, wire.data(), wire.size(), 0, reinterpret_cast<sockaddr*>(&dst),
                     sizeof dst) < 0) {
            ::close(fd);
            return std::nullopt;
        }
        uint8_t buf[4096];
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        ::close(fd);
        if (n <= 0) return std::nullopt;
        try {
            DnsMessage resp = DnsMessage::decode(ByteView(buf, size_t(n)));
            ProbeObservation obs;
            obs.answer_bytes = resp.answer_section_bytes();
            obs.ipid = 0;  // not visible over a UDP socket
            obs.time = 0;
            return obs;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

private:
    std::set<std::string> consent_;
    double timeout_;
    uint32_t txid_ = 1;
};

std::vector<ProbeRow> probe_live(const json& targets, const std::vector<std::string>& checks,
                                 bool consent_given) {
    if (!consent_given)
        throw ConsentMissing("live mode requires --i-own-these-hosts acknowledging that every "
                             "listed target is yours");
    std::set<std::string> consent;
    for (const auto& t : targets.value("targets", json::array()))
        if (t.contains("address")) consent.insert(t.at("address").get<std::string>());

    LiveDnsProbe live(consent, 3.0);
    std::vector<ProbeRow> rows;
    auto enabled = [&](const std::string& c) {
        return checks.empty() || std::find(checks.begin(), checks.end(), c) != checks.end();
    };
    for (const auto& t : targets.value("targets", json::array())) {
        std::string name = t.value("name", "?");
        if (!t.contains("address")) {
            rows.push_back(ProbeRow{name, "live", "skipped: no address"});
            continue;
        }
        std::string address = t.at("address").get<std::string>();
        std::string domain = t.value("domain", "");
        if (enabled("predictability")) {
            auto probe = [&](int) { return live.query(address, domain, RrType::MX); };
            auto rep = algorithm1_predictability(probe, domain, address);
            rows.push_back(ProbeRow{
                name, "predictability",
                rep.responded ? std::to_string(rep.distinct_response_count) +
                                    " distinct responses in " +
                                    std::to_string(rep.batches_used) + " batches"
                              : "no responses"});
        }
        for (const std::string& c : {std::string("fragmentation"), std::string("ipid"),
                                     std::string("icmp")})
            if (enabled(c)) rows.push_back(ProbeRow{name, c, "unsupported in live mode"});
    }
    return rows;
}

void write_probe_report(const std::vector<ProbeRow>& rows, const std::string& out_dir) {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    std::ofstream txt(fs::path(out_dir) / "probe_report.txt");
    json j = json::array();
    for (const auto& r : rows) {
        txt << r.line() << "\n";
        j.push_back({{"target", r.target}, {"check", r.check}, {"result", r.result}});
    }
    std::ofstream js(fs::path(out_dir) / "probe_report.json");
    js << j.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"off-path DNS cache poisoning laboratory"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, targets_path, grid_path, mode = "sim", checks_csv;
    std::string run_dir, profile_override;
    uint64_t seed_override = 0;
    bool seed_given = false, consent = false;
    unsigned threads = 1;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_override, "override the scenario seed")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* sim_cmd = app.add_subcommand("simulate", "run a scenario");
    sim_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    sim_cmd->add_option("--out", out_dir, "output directory")->required();
    sim_cmd->add_option("--profile", profile_override,
                        "reassembly profile: rfc791 (15 s) or linux (30 s)");
    add_seed(sim_cmd);

    CLI::App* probe_cmd = app.add_subcommand("probe", "run measurement checks against targets");
    probe_cmd->add_option("--scenario", scenario_path, "scenario file (sim mode)");
    probe_cmd->add_option("--targets", targets_path, "targets file")->required();
    probe_cmd->add_option("--mode", mode, "sim or live")->check(CLI::IsMember({"sim", "live"}));
    probe_cmd->add_option("--checks", checks_csv,
                          "comma list of fragmentation,ipid,predictability,icmp");
    probe_cmd->add_flag("--i-own-these-hosts", consent,
                        "acknowledge ownership of every live target");
    probe_cmd->add_option("--out", out_dir, "output directory");
    add_seed(probe_cmd);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo success-rate grid");
    sweep_cmd->add_option("--grid", grid_path, "grid file")->required();
    sweep_cmd->add_option("--scenario", scenario_path, "scenario file (kind=scenario)");
    sweep_cmd->add_option("--threads", threads, "worker threads for independent trials");
    sweep_cmd->add_option("--out", out_dir, "output directory")->required();
    add_seed(sweep_cmd);

    CLI::App* report_cmd = app.add_subcommand("report", "print a previous run's report");
    report_cmd->add_option("run_dir", run_dir, "directory written by simulate")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim_cmd->parsed()) {
            Scenario sc = load_scenario(scenario_path);
            if (!profile_override.empty()) {
                if (profile_override != "rfc791" && profile_override != "linux")
                    throw SchemaError("--profile", "must be rfc791 or linux");
                sc.profile = profile_override;
            }
            RunReport rep = simulate(sc, out_dir,
                                     seed_given ? std::optional<uint64_t>(seed_override)
                                                : std::nullopt);
            std::cout << rep.to_json().dump(2) << "\n";
            std::cout << "report written to " << out_dir << "\n";
            return 0;
        }
        if (probe_cmd->parsed()) {
            json targets = load_json_file(targets_path, "targets");
            std::vector<ProbeRow> rows;
            if (mode == "live") {
                rows = probe_live(targets, split_csv(checks_csv), consent);
            } else {
                if (scenario_path.empty())
                    throw SchemaError("--scenario", "sim mode needs a scenario file");
                Scenario sc = load_scenario(scenario_path);
                rows = probe_sim(sc, targets, split_csv(checks_csv));
            }
            for (const auto& r : rows) std::cout << r.line() << "\n";
            write_probe_report(rows, out_dir);
            if (!out_dir.empty() && mode == "sim") emit_cdfs(aggregate_probe_rows(rows), out_dir);
            return 0;
        }
        if (sweep_cmd->parsed()) {
            json grid = load_json_file(grid_path, "grid");
            std::optional<Scenario> sc;
            if (!scenario_path.empty()) sc = load_scenario(scenario_path);
            uint64_t seed = seed_given ? seed_override
                                       : (sc ? sc->seed : grid.value("seed", uint64_t(1)));
            auto rows = sweep(grid, sc, seed, threads);
            fs::create_directories(out_dir);
            write_sweep_csv(rows, (fs::path(out_dir) / "sweep.csv").string());
            for (const auto& r : rows)
                std::printf("%-60s trials=%llu rate=%.6f ci95=[%.6f, %.6f]\n", r.point.c_str(),
                            static_cast<unsigned long long>(r.trials), r.rate, r.ci_lo, r.ci_hi);
            return 0;
        }
        if (report_cmd->parsed()) {
            json rep = load_json_file((fs::path(run_dir) / "report.json").string(), "report");
            std::cout << rep.dump(2) << "\n";
            if (rep.contains("outcome"))
                std::cout << "attack " << (rep["outcome"]["success"].get<bool>() ? "succeeded"
                                                                                 : "failed")
                          << "\n";
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const ConsentMissing& e) {
        std::cerr << "consent error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
