#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "meanfield/errors.hpp"
#include "meanfield/harness.hpp"


namespace {

constexpr int kPass = 0;
constexpr int kAssertionFailed = 1;
constexpr int kConfigError = 2;

struct Options {
    std::string config;
    std::string out;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
};

mf::SweepConfig load(const Options& o) {
    mf::SweepConfig cfg = o.config.empty() ? mf::SweepConfig{} : mf::SweepConfig::load(o.config);
    if (!o.out.empty())
        cfg.output_dir = o.out;
    if (o.workers)
        cfg.workers = *o.workers;
    if (o.seed)
        cfg.seed = *o.seed;
    cfg.validate();
    return cfg;
}

void print_assertions(const std::vector<mf::Assertion>& as) {
    for (const auto& a : as)
        std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
}

int converge(const mf::SweepConfig& cfg) {
    mf::SweepReport r = mf::run_convergence_study(cfg);
    mf::emit(r, cfg.output_dir);
    for (const auto& c : r.cells)
        if (c.status != "ok")
            std::cout << "SKIP eps=" << mf::format_double(c.epsilon) << " N=" << c.particles << ": "
                      << c.reason << "\n";
    for (const auto& f : r.fits)
        std::cout << "slope t=" << mf::format_double(f.time) << ": " << f.slope << " (rms residual "
                  << f.residual << ", " << f.points << " points)\n";
    print_assertions(r.assertions);
    std::cout << "report written to " << cfg.output_dir << "\n";
    if (r.has_skipped())
        return kConfigError;
    return r.passed() ? kPass : kAssertionFailed;
}

int assumptions(const mf::SweepConfig& cfg) {
    mf::AssumptionReport r = mf::run_assumption_check(cfg);
    mf::emit(r, cfg.output_dir);
    for (const auto& c : r.checks)
        std::cout << (c.flat ? "PASS " : "FAIL ") << c.kind << " " << c.functional << ": median " << c.median
                  << ", range [" << c.min << ", " << c.max << "]\n";
    std::cout << "report written to " << cfg.output_dir << "\n";
    return r.passed() ? kPass : kAssertionFailed;
}

int checks(const mf::CheckReport& r, const mf::SweepConfig& cfg) {
    mf::emit(r, cfg.output_dir);
    print_assertions(r.assertions);
    std::cout << "report written to " << cfg.output_dir << "\n";
    return r.passed() ? kPass : kAssertionFailed;
}

int state_dump(const mf::SweepConfig& cfg) {
    for (const auto& p : mf::dump_states(cfg, cfg.output_dir))
        std::cout << "wrote " << p.string() << ".bin\n";
    return kPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field versus many-body fermion dynamics: sweeps, checks and state dumps"};
    app.require_subcommand(1);
    Options opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "YAML configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "output directory (overrides output.dir)");
        sub->add_option("--workers", opts.workers, "parallel sweep cells")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opts.seed, "random seed (overrides run.seed)");
    };
    auto* conv = app.add_subcommand("converge", "exact versus mean-field distances across the eps sweep");
    auto* assume = app.add_subcommand("assumptions", "scaled semiclassical functionals of reference states");
    auto* fock = app.add_subcommand("fock-checks", "Fock-space identities and bounds");
    auto* kac = app.add_subcommand("kac-check", "Kac-rescaled versus eps dynamics");
    auto* dump = app.add_subcommand("state-dump", "write initial states as binary dumps");
    for (auto* s : {conv, assume, fock, kac, dump})
        add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kPass : kConfigError;
    }

    try {
        mf::SweepConfig cfg = load(opts);
        if (*conv)
            return converge(cfg);
        if (*assume)
            return assumptions(cfg);
        if (*fock)
            return checks(mf::run_fock_checks(cfg), cfg);
        if (*kac)
            return checks(mf::run_kac_check(cfg), cfg);
        return state_dump(cfg);
    } catch (const mf::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
    } catch (const mf::CapExceeded& e) {
        std::cerr << "cap exceeded: " << e.what() << "\n";
    } catch (const mf::PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << "\n";
    } catch (const mf::NumericalError& e) {
        std::cerr << "numerical check failed: " << e.what() << "\n";
        return kAssertionFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kConfigError;
}
