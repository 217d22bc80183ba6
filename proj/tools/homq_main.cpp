// Command-line front end: controller synthesis, certificate verification,
// quantizer inspection, closed-loop simulation and bit-budget sweeps.
//
// All commands read a single JSON config (see README); a few flags override
// config fields. Outputs carry the hash of the effective config so runs can
// be traced back to their exact inputs.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "homq/serialization.hpp"
#include "homq/simulator.hpp"

namespace fs = std::filesystem;
using homq::Json;
using homq::Matrix;
using homq::Vector;

namespace {

struct CliOptions {
    std::string config_path;
    std::string cert_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> delta;
    std::optional<int> bits;
    std::optional<std::string> floor_mode;
    std::optional<double> h;
    std::optional<double> t_end;
    std::vector<std::int64_t> sweep_budgets;
};

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw homq::InvalidInput("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw homq::InvalidInput(std::string("parse error in ") + path + ": " + e.what());
    }
}

// Effective config = file contents + flag overrides; every output references
// its hash.
Json effective_config(const CliOptions& cli) {
    Json cfg = cli.config_path.empty() ? Json::object() : load_json(cli.config_path);
    if (cli.seed) cfg["seed"] = *cli.seed;
    if (cli.delta) cfg["delta"] = *cli.delta;
    if (cli.bits) cfg["quantizer"]["budget"] = std::int64_t{1} << *cli.bits;
    if (cli.floor_mode) cfg["quantizer"]["floor_mode"] = (*cli.floor_mode == "on");
    if (cli.h) cfg["simulation"]["h"] = *cli.h;
    if (cli.t_end) cfg["simulation"]["t_end"] = *cli.t_end;
    if (!cli.sweep_budgets.empty()) cfg["sweep"]["budgets"] = cli.sweep_budgets;
    return cfg;
}

homq::PlantModel plant_from(const Json& cfg) {
    if (!cfg.contains("plant")) throw homq::InvalidInput("config: missing \"plant\"");
    return homq::PlantModel::validated(homq::matrix_from_json(cfg["plant"].at("A")),
                                       homq::matrix_from_json(cfg["plant"].at("B")));
}

double delta_from(const Json& cfg) {
    double delta = cfg.value("delta", 0.4);
    if (!(delta > 0.0 && delta < 1.0)) throw homq::InvalidInput("config: delta must be in (0,1)");
    return delta;
}

homq::SolveOptions solve_options(const Json& cfg) {
    homq::SolveOptions opts;
    opts.seed = cfg.value("seed", std::uint64_t{0});
    if (cfg.contains("synthesis")) {
        const Json& s = cfg["synthesis"];
        opts.max_iters = s.value("max_iters", opts.max_iters);
        opts.restarts = s.value("restarts", opts.restarts);
        opts.target_margin = s.value("target_margin", opts.target_margin);
        opts.maximize_decay = s.value("maximize_decay", opts.maximize_decay);
        opts.tau_grid = s.value("tau_grid", opts.tau_grid);
    }
    return opts;
}

homq::CertificateFile synthesize(const Json& cfg) {
    auto plant = plant_from(cfg);
    double mu = cfg.value("mu", -1.0);
    if (mu != -1.0)
        throw homq::InvalidInput(
            "config: quantized-gain synthesis is defined for mu = -1 only "
            "(other degrees apply to the homogenization and the baseline pair)");
    auto hom = homq::solve_homogenization(plant, mu);
    double delta = delta_from(cfg);
    double tau = cfg.value("tau", 0.0);
    homq::CertificateFile cert;
    cert.A = plant.A;
    cert.B = plant.B;
    cert.G0 = hom.G0;
    cert.K0 = hom.K0;
    cert.Gd = hom.Gd;
    cert.gains = homq::solve_gain_lmi(hom.A0, plant.B, hom.Gd, delta, tau, solve_options(cfg));
    return cert;
}

std::int64_t budget_from(const Json& cfg) {
    if (cfg.contains("quantizer")) {
        const Json& q = cfg["quantizer"];
        if (q.contains("budget")) return q["budget"].get<std::int64_t>();
        if (q.contains("bits")) return std::int64_t{1} << q["bits"].get<int>();
    }
    return 256;
}

bool floor_mode_from(const Json& cfg) {
    if (cfg.contains("quantizer")) return cfg["quantizer"].value("floor_mode", true);
    return true;
}

homq::PerturbationSpec perturbation_from(const Json& sim) {
    homq::PerturbationSpec spec;
    if (!sim.contains("perturbation")) return spec;
    const Json& p = sim["perturbation"];
    std::string kind = p.value("kind", "none");
    if (kind == "none")
        spec.kind = homq::PerturbationKind::none;
    else if (kind == "matched-sinusoid")
        spec.kind = homq::PerturbationKind::matched_sinusoid;
    else if (kind == "matched-constant")
        spec.kind = homq::PerturbationKind::matched_constant;
    else if (kind == "mismatched-table")
        spec.kind = homq::PerturbationKind::mismatched_table;
    else
        throw homq::InvalidInput("config: unknown perturbation kind " + kind);
    spec.amplitude = p.value("amplitude", 0.0);
    spec.kappa_budget = p.value("kappa_budget", 0.0);
    if (p.contains("times")) {
        for (const auto& t : p["times"]) spec.table_times.push_back(t.get<double>());
        for (const auto& v : p["values"]) spec.table_values.push_back(homq::vector_from_json(v));
    }
    return spec;
}

// Apply the configured certificate scale (explicit factor or auto targeting).
homq::CertificateFile scaled_for_simulation(const homq::CertificateFile& cert, const Json& cfg,
                                            const Vector& x0) {
    const Json sim = cfg.value("simulation", Json::object());
    homq::Matrix A0 = cert.A + cert.B * cert.K0;
    double factor = 1.0;
    if (sim.contains("cert_scale")) {
        const Json& cs = sim["cert_scale"];
        if (cs.is_string() && cs.get<std::string>() == "auto") {
            double target = sim.value("scale_t_target", 10.0);
            factor = homq::auto_scale_factor(cert.gains, cert.Gd, x0, target);
        } else if (cs.is_number()) {
            factor = cs.get<double>();
        } else {
            throw homq::InvalidInput("config: cert_scale must be a number or \"auto\"");
        }
    }
    if (factor == 1.0) return cert;
    homq::CertificateFile out = cert;
    out.gains = homq::rescale_certificate(cert.gains, A0, cert.B, cert.Gd, factor);
    return out;
}

homq::SimulationConfig simulation_config(const homq::CertificateFile& cert, const Json& cfg) {
    const Json sim = cfg.value("simulation", Json::object());
    const int n = static_cast<int>(cert.A.rows());
    Vector x0 = sim.contains("x0") ? homq::vector_from_json(sim["x0"]) : Vector::Zero(n);

    auto scaled = scaled_for_simulation(cert, cfg, x0);
    homq::Dilation dilation(scaled.Gd, scaled.gains.P);
    auto quantizer = n == 1 ? homq::SphericalQuantizer::scalar(scaled.gains.P(0, 0))
                            : homq::SphericalQuantizer(
                                  homq::budget_to_resolution(n, budget_from(cfg), floor_mode_from(cfg)),
                                  scaled.gains.P);

    homq::SimulationConfig run(scaled.A, scaled.B, scaled.gains.K, std::move(dilation),
                               std::move(quantizer), x0);
    run.t_end = sim.value("t_end", 20.0);
    run.h = sim.value("h", 1e-4);
    run.eps_dead_rel = sim.value("eps_dead_rel", 1e-6);
    run.settle_threshold = sim.value("settle_threshold", 0.02);
    run.dwell = sim.value("dwell", 0.5);
    run.sample_period = sim.value("sample_period", 1e-2);
    std::string hold = sim.value("hold_mode", "continuous");
    if (hold == "sample-and-hold")
        run.hold = homq::HoldMode::sample_and_hold;
    else if (hold != "continuous")
        throw homq::InvalidInput("config: unknown hold_mode " + hold);
    run.perturbation = perturbation_from(sim);
    return run;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw homq::InvalidInput("cannot write " + path.string());
    out << text;
}

int cmd_synthesize(const CliOptions& cli) {
    Json cfg = effective_config(cli);
    std::string hash = homq::config_hash(cfg);
    auto cert = synthesize(cfg);
    fs::create_directories(cli.out_dir);
    Json doc = homq::certificate_to_json(cert);
    doc["config_hash"] = hash;
    write_text(fs::path(cli.out_dir) / "certificate.json", doc.dump(2) + "\n");
    std::cout << "certificate written (config " << hash << ")\n"
              << "  margin_mono = " << cert.gains.margin_mono
              << "\n  margin_W    = " << cert.gains.margin_w << "\n  rho         = "
              << cert.gains.rho << "\n";
    return 0;
}

int cmd_verify(const CliOptions& cli) {
    if (cli.cert_path.empty()) throw homq::InvalidInput("verify: --cert is required");
    auto cert = homq::certificate_from_json(load_json(cli.cert_path));
    double delta = cli.delta.value_or(cert.gains.delta);
    double tau = cert.gains.tau;
    Matrix A0 = cert.A + cert.B * cert.K0;
    auto margins = homq::verify_lmi(A0, cert.B, cert.Gd, cert.gains.X, cert.gains.Y, delta, tau);
    bool certified = margins.mono >= 1e-6 && margins.posdef >= 1e-6 && margins.w <= -1e-6;
    std::cout << "margin_mono   = " << margins.mono << "\nmargin_posdef = " << margins.posdef
              << "\nmargin_W      = " << margins.w << "\n";
    if (certified)
        std::cout << "rho           = "
                  << homq::compute_rho(A0, cert.B, cert.Gd, cert.gains.X, cert.gains.Y, delta, tau)
                  << "\ncertified\n";
    else
        std::cout << "not certified\n";
    return certified ? 0 : 2;
}

int cmd_quantize_demo(const CliOptions& cli) {
    Json cfg = effective_config(cli);
    auto cert = cli.cert_path.empty() ? synthesize(cfg)
                                      : homq::certificate_from_json(load_json(cli.cert_path));
    const int n = static_cast<int>(cert.A.rows());
    homq::Dilation dilation(cert.Gd, cert.gains.P);
    auto quantizer =
        n == 1 ? homq::SphericalQuantizer::scalar(cert.gains.P(0, 0))
               : homq::SphericalQuantizer(
                     homq::budget_to_resolution(n, budget_from(cfg), floor_mode_from(cfg)),
                     cert.gains.P);

    std::cout << "seeds: " << quantizer.seed_count() << ", bits: " << quantizer.bits()
              << ", delta_N: " << quantizer.delta_n() << "\n";

    const Json sim = cfg.value("simulation", Json::object());
    Vector x0 = sim.contains("x0") ? homq::vector_from_json(sim["x0"]) : Vector::Ones(n);
    std::vector<Vector> states{x0, dilation.apply(1.0, x0), dilation.apply(-1.0, x0)};
    std::mt19937_64 rng(cfg.value("seed", std::uint64_t{0}));
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 3; ++i) {
        Vector x(n);
        for (int j = 0; j < n; ++j) x[j] = gauss(rng);
        states.push_back(x);
    }
    for (const auto& x : states) {
        auto sample = quantizer.quantize(dilation, x);
        std::cout << "x = [" << x.transpose() << "]  code " << sample.code << " (0x"
                  << quantizer.encode_hex(sample.code) << ")  seed = [" << sample.seed.transpose()
                  << "]";
        if (sample.code > 0)
            std::cout << "  err = "
                      << dilation.weighted_norm(sample.seed - dilation.projector(x));
        std::cout << "\n";
    }
    return 0;
}

int cmd_simulate(const CliOptions& cli) {
    Json cfg = effective_config(cli);
    std::string hash = homq::config_hash(cfg);
    auto cert = cli.cert_path.empty() ? synthesize(cfg)
                                      : homq::certificate_from_json(load_json(cli.cert_path));
    auto run = simulation_config(cert, cfg);
    auto traj = homq::integrate(run);

    std::optional<homq::LyapunovReport> lyap;
    try {
        lyap = homq::lyapunov_report(traj, cert.gains.rho > 0 ? cert.gains.rho : 1e-9);
    } catch (const homq::InvalidInput&) {
        // short or already-settled runs have no rate statistics
    }

    fs::create_directories(cli.out_dir);
    int decimation = cfg.value("simulation", Json::object()).value("decimation", 1);
    homq::write_trajectory_csv(traj, (fs::path(cli.out_dir) / "trajectory.csv").string(), hash,
                               decimation);
    Json summary = homq::trajectory_summary(traj, lyap ? &*lyap : nullptr, hash);
    write_text(fs::path(cli.out_dir) / "summary.json", summary.dump(2) + "\n");

    if (traj.settling_time)
        std::cout << "settled at t = " << *traj.settling_time << "\n";
    else
        std::cout << "no settling within the horizon\n";
    return 0;
}

struct SweepRow {
    std::int64_t budget;
    std::string m = "";
    std::string delta_n = "";
    std::string feasible = "";
    std::string rho = "";
    std::string settling = "";
};

int cmd_sweep(const CliOptions& cli) {
    Json cfg = effective_config(cli);
    std::string hash = homq::config_hash(cfg);
    if (!cfg.contains("sweep") || !cfg["sweep"].contains("budgets"))
        throw homq::InvalidInput("config: sweep.budgets is required");
    std::vector<std::int64_t> budgets;
    for (const auto& b : cfg["sweep"]["budgets"]) budgets.push_back(b.get<std::int64_t>());

    auto cert = cli.cert_path.empty() ? synthesize(cfg)
                                      : homq::certificate_from_json(load_json(cli.cert_path));
    const int n = static_cast<int>(cert.A.rows());
    const double delta = delta_from(cfg);
    const bool floored = floor_mode_from(cfg);

    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };

    auto run_one = [&](std::int64_t N) -> SweepRow {
        SweepRow row{N};
        homq::SphericalLayout layout;
        try {
            layout = homq::budget_to_resolution(n, N, floored);
        } catch (const homq::InvalidInput&) {
            row.feasible = "budget-too-small";
            return row;
        }
        row.m = std::to_string(layout.bins_polar);
        row.delta_n = fmt(layout.delta_n);
        row.rho = fmt(cert.gains.rho);
        if (layout.delta_n >= delta) {
            row.feasible = "0";  // quantizer cannot meet the error budget
            return row;
        }
        row.feasible = "1";
        Json local = cfg;
        local["quantizer"]["budget"] = N;
        local["quantizer"]["floor_mode"] = floored;
        auto run = simulation_config(cert, local);
        try {
            auto traj = homq::integrate(run);
            if (traj.settling_time) row.settling = fmt(*traj.settling_time);
        } catch (const homq::Divergence&) {
            row.settling = "diverged";
        }
        return row;
    };

    std::vector<std::future<SweepRow>> futures;
    futures.reserve(budgets.size());
    for (auto N : budgets)
        futures.push_back(std::async(std::launch::async, run_one, N));

    fs::create_directories(cli.out_dir);
    std::ofstream out(fs::path(cli.out_dir) / "sweep.csv");
    out << "# config_hash=" << hash << "\n";
    out << "N,m,delta_N,feasible,rho,settling_time\n";
    for (auto& f : futures) {
        SweepRow row = f.get();
        out << row.budget << ',' << row.m << ',' << row.delta_n << ',' << row.feasible << ','
            << row.rho << ',' << row.settling << "\n";
    }
    std::cout << "sweep written (" << budgets.size() << " rows, config " << hash << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-budget quantized feedback: synthesis, verification, simulation"};
    app.set_help_flag("--help", "print usage");  // frees --h for the step size
    app.require_subcommand(1);

    CliOptions cli;
    app.add_option("--config", cli.config_path, "JSON config file");
    app.add_option("--out", cli.out_dir, "output directory");
    app.add_option("--seed", cli.seed, "RNG seed override");
    app.add_option("--delta", cli.delta, "quantization error budget override");
    app.add_option("--bits", cli.bits, "bit budget override (N = 2^bits)");
    app.add_option("--floor-mode", cli.floor_mode, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--h", cli.h, "integration step override");
    app.add_option("--t-end", cli.t_end, "horizon override");

    auto* synth = app.add_subcommand("synthesize", "solve the gain inequalities, write a certificate");
    auto* verify = app.add_subcommand("verify", "recheck a certificate's margins");
    verify->add_option("--cert", cli.cert_path, "certificate file");
    auto* demo = app.add_subcommand("quantize-demo", "print seeds and codes for sample states");
    demo->add_option("--cert", cli.cert_path, "certificate file");
    auto* simulate = app.add_subcommand("simulate", "integrate the quantized closed loop");
    simulate->add_option("--cert", cli.cert_path, "certificate file");
    auto* sweep = app.add_subcommand("sweep", "settling time across bit budgets");
    sweep->add_option("--cert", cli.cert_path, "certificate file");
    sweep->add_option("--budgets", cli.sweep_budgets, "budget list override");

    for (auto* sub : {synth, verify, demo, simulate, sweep}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synthesize(cli);
        if (verify->parsed()) return cmd_verify(cli);
        if (demo->parsed()) return cmd_quantize_demo(cli);
        if (simulate->parsed()) return cmd_simulate(cli);
        if (sweep->parsed()) return cmd_sweep(cli);
    } catch (const homq::Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << " (best margin " << e.best_margin << ")\n";
        return 2;
    } catch (const homq::Divergence& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const homq::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
