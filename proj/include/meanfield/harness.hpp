#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "meanfield/diagnostics.hpp"
#include "meanfield/fock.hpp"
#include "meanfield/io.hpp"
#include "meanfield/manybody.hpp"
#include "meanfield/potential.hpp"
#include "meanfield/states.hpp"

namespace mf {

inline constexpr const char* kSweepSchema = "meanfield.sweep/1";
inline constexpr const char* kAssumptionSchema = "meanfield.assumptions/1";
inline constexpr const char* kCheckSchema = "meanfield.checks/1";
inline constexpr const char* kLibraryVersion = "1.0.0";

enum class ParticleRule { fixed, density };
enum class InitialKind { free_gas, coherent, slater };

InitialKind parse_initial_kind(const std::string& name);
std::string to_string(InitialKind kind);

/// Everything a run depends on. Loaded from a YAML document of flat tables:
/// grid, sweep, potential, propagator, state, diagnostics, fock, kac, output, run.
struct SweepConfig {
    // grid
    int dim = 1;
    double box_length = 1.0;
    int points = 16;
    // sweep
    std::vector<double> epsilons{0.5, 1.0 / 3.0, 0.25};
    ParticleRule particle_rule = ParticleRule::density;
    int particles = 2;
    Region region = Region::full();
    // potential
    PotentialSpec potential{PotentialSpec::Shape::gaussian, 5.0, 0.25};
    // propagator (epsilon is set per sweep cell)
    PropagatorConfig propagator{0.25, 0.005};
    // state
    InitialKind initial = InitialKind::free_gas;
    double delta = -1.0;
    double ramp_width = 0.25;
    // diagnostics
    std::vector<double> times{0.0, 0.25, 0.5};
    bool semiclassical = true;
    int localization_power = 2;
    int z_stride = 1;
    int p_stride = 1;
    /// Times of the free flow inside W_z for the assumption check.
    std::vector<double> assumption_times{0.0};
    // fock checks
    int fock_modes = 6;
    int fock_particles = 2;
    int fock_trials = 50;
    int bound_modes = 8;
    int bound_trials = 100;
    int fluct_modes = 10;
    int fluct_particles = 3;
    int fluct_samples = 10;
    double fluct_time = 0.5;
    BogoliubovPhase phase = BogoliubovPhase::vacuum;
    // kac check
    double kac_gamma = 4.0;
    double kac_time = 0.2;
    int kac_points = 16;
    int kac_particles = 2;
    /// Gaussian orbital width as a fraction of the box length.
    double kac_width = 0.12;
    // output / run
    std::string output_dir = "out";
    int workers = 1;
    std::uint64_t seed = 1;

    static SweepConfig from_yaml(const std::string& text);
    static SweepConfig load(const std::filesystem::path& path);
    /// Structural checks; throws ConfigError. Caps are checked per sweep cell.
    void validate() const;
    Grid grid() const;
    /// Particle number for a sweep cell.
    int particles_for(double epsilon) const;
    /// Canonical form; output directory and worker count are excluded since
    /// they never change a result.
    Json to_json() const;
    /// FNV-1a hash of the canonical JSON form, as 16 hex digits.
    std::string hash() const;
};

struct SweepRow {
    int cell = 0;
    double epsilon = 0.0;
    int particles = 0;
    double time = 0.0;
    /// "ok" or "skipped"
    std::string status = "ok";
    std::string reason;
    double hs_per_sqrt_n = 0.0;
    double trace_per_n = 0.0;
    double fluct_per_n = 0.0;
    double purity_per_n = 0.0;
    double concentration_scaled = 0.0;
    double comm_scaled = 0.0;
    double grad_scaled = 0.0;
    double mass_scaled = 0.0;

    bool operator==(const SweepRow&) const = default;
};

/// Least-squares fit log y = intercept + slope log eps.
struct SlopeFit {
    double time = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual of the fit.
    double residual = 0.0;
    int points = 0;

    bool operator==(const SlopeFit&) const = default;
};

struct Assertion {
    std::string name;
    bool passed = false;
    std::string detail;

    bool operator==(const Assertion&) const = default;
};

/// Per-cell outcome and the empirical no-concentration window: t_star is the first
/// scheduled time at which the scaled concentration exceeds twice its initial value
/// (negative if never), envelope_constant the smallest C with c(t) <= C exp(C t).
struct CellSummary {
    int cell = 0;
    double epsilon = 0.0;
    int particles = 0;
    std::string status = "ok";
    std::string reason;
    double t_star = -1.0;
    double envelope_constant = 0.0;

    bool operator==(const CellSummary&) const = default;
};

struct SweepReport {
    std::string schema = kSweepSchema;
    std::string config_hash;
    Json provenance = Json::object();
    std::vector<CellSummary> cells;
    std::vector<SweepRow> rows;
    std::vector<SlopeFit> fits;
    std::vector<Assertion> assertions;

    bool passed() const;
    bool has_skipped() const;
    bool operator==(const SweepReport& o) const;
};

SweepReport run_convergence_study(const SweepConfig& cfg);

/// Fixed CSV column order of sweep rows.
std::string sweep_csv_header();
std::string to_csv(const SweepReport& report);
Json to_json(const SweepReport& report);
SweepReport sweep_report_from_json(const Json& j);
/// report.json, report.csv and curves/*.csv under `dir`.
void emit(const SweepReport& report, const std::filesystem::path& dir);

struct AssumptionRow {
    std::string kind;
    double epsilon = 0.0;
    double particles = 0.0;
    SemiclassicalReport report;
};

struct FlatnessCheck {
    std::string kind;
    std::string functional;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    bool flat = false;
};

struct AssumptionReport {
    std::string schema = kAssumptionSchema;
    std::string config_hash;
    Json provenance = Json::object();
    std::vector<AssumptionRow> rows;
    std::vector<FlatnessCheck> checks;

    bool passed() const;
};

/// Free gas and coherent states over the eps list; the four functionals scaled by
/// eps^{d-1}, eps^{d-1}, eps^d, eps^d must stay within a factor 3 of their median.
AssumptionReport run_assumption_check(const SweepConfig& cfg);
/// Flat within `factor` of the median; identically zero series count as flat.
FlatnessCheck flatness(const std::string& kind, const std::string& functional,
                       const std::vector<double>& values, double factor = 3.0);
Json to_json(const AssumptionReport& report);
std::string to_csv(const AssumptionReport& report);
void emit(const AssumptionReport& report, const std::filesystem::path& dir);

/// Generic pass/fail bundle for fock-checks and kac-check.
struct CheckReport {
    std::string schema = kCheckSchema;
    std::string kind;
    std::string config_hash;
    Json provenance = Json::object();
    std::vector<Assertion> assertions;
    Json details = Json::object();

    bool passed() const;
};

/// CAR relations, quadratic-operator bounds, particle-hole identities and the
/// fluctuation-number identity on small lattices.
CheckReport run_fock_checks(const SweepConfig& cfg);
/// Kac-rescaled versus eps dynamics at eps = 1 / kac_gamma.
CheckReport run_kac_check(const SweepConfig& cfg);
Json to_json(const CheckReport& report);
void emit(const CheckReport& report, const std::filesystem::path& dir);

/// Initial mean-field state and matching many-body state for one sweep cell.
struct InitialData {
    OnePDM omega;
    std::vector<Vector> orbitals;
};
InitialData initial_data(const SweepConfig& cfg, double epsilon);

/// Writes omega_0 (and psi_0 within the oracle caps) for every eps under dir/states.
std::vector<std::filesystem::path> dump_states(const SweepConfig& cfg, const std::filesystem::path& dir);

Json provenance(const SweepConfig& cfg);

} // namespace mf
