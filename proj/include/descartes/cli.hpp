#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "descartes/catalog.hpp"
#include "descartes/dynamics.hpp"
#include "descartes/inverse.hpp"

namespace descartes::cli {

using json = nlohmann::ordered_json;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform53(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct SystemSource {
    std::string catalog;            ///< empty for inline systems
    catalog::Params params;
    std::optional<SystemDefinition> inline_def;
    /// Inline systems: sampling box for grid checks (empty when not given).
    std::vector<double> domain_lo, domain_hi;
};

struct LambdaSelection {
    std::string preset;             ///< catalog preset (empty: default or expressions)
    std::vector<Expr> expressions;  ///< overrides the preset when non-empty
    std::optional<Expr> potential;
    bool potential_given = false;
};

enum class Formulation { Cartesian, Classical, Both };

struct InitialConditions {
    std::vector<Vec> points;
    std::vector<Vec> velocities;    ///< classical runs; empty: v(x0)
    std::size_t grid = 0;           ///< random domain points instead of `points`
    std::uint64_t seed = 7;
};

struct MonitorSpec {
    std::string name;
    Expr field;
    double tolerance = 1e-8;
};

struct OutputSpec {
    std::string dir;                ///< empty: write nothing but stdout
    std::string prefix = "run";
    bool csv = true;
    bool report = true;
    bool plot_data = false;         ///< tidy long-format CSV for external plotting
};

struct BertrandTerm {
    int j = 0;
    double K = 0.0;
    double C = 0.0;
};

/// Inputs of the `inverse` section; which fields matter depends on the route.
struct InverseSpec {
    std::string route;
    int dim = 0;
    std::vector<Expr> f;
    std::optional<Expr> f_aux;
    Expr lambda = Expr::constant(1.0);
    std::vector<Expr> metric_upper;  ///< empty: identity
    std::optional<Expr> h;
    Expr S, nu = Expr::constant(1.0), Phi;
    std::string mode = "general";    ///< joukovski: general | exact-nu | orthogonal
    double h0 = 0.0;
    // joukovski orthogonal coordinates
    std::vector<Expr> metric_diagonal;
    Expr g;
    Vec base;
    // stackel
    std::vector<std::vector<Expr>> phi;
    std::vector<Expr> Psi;
    std::vector<double> alpha;
    Vec probe;
    // bertrand
    double b = 0.0;
    Expr Psi_tau, h_r;
    double r_ref = 1.0;
    std::vector<BertrandTerm> terms;
    std::vector<double> taus;
    // sampling
    std::vector<Vec> points;
    std::vector<double> lo, hi;
    std::size_t count = 0;
    std::uint64_t seed = 7;
    // orbit check
    std::optional<Vec> orbit_x0;
    double orbit_t1 = 1.0;
};

struct RunPlan {
    std::string origin;
    SystemSource system;
    LambdaSelection lambda;
    IntegratorConfig integrator;
    bool integrator_t1_given = false;
    Formulation formulation = Formulation::Cartesian;
    InitialConditions initial;
    std::vector<MonitorSpec> monitors;
    bool monitors_given = false;
    OutputSpec output;
    std::map<std::string, double> tolerances;  ///< per-check overrides
    std::size_t verify_grid = 1000;
    std::uint64_t seed = 7;
    unsigned workers = 0;
    std::optional<InverseSpec> inverse;
};

/// Parse and validate a spec document. Throws SpecError with every problem
/// found ("section.key: message").
RunPlan parse_spec(const std::string& text, const std::string& origin = "<spec>");
RunPlan load_spec(const std::string& path);

/// Canonical JSON form; parse_spec(plan_to_json(p).dump()) is structurally identical to p.
json plan_to_json(const RunPlan& plan);

/// Resolved system definition (catalog or inline, with the λ selection applied).
SystemDefinition plan_definition(const RunPlan& plan);

/// Initial points: explicit, seeded random domain points, or the catalog probe.
std::vector<Vec> initial_points(const RunPlan& plan);

// ---------------------------------------------------------------- export

/// Header t,x1..xN,v1..vN[,mu1..muM][,monitor:name...]; 17 significant digits, LF.
std::string trajectory_csv(const Trajectory& traj);
/// t,series,value rows (one per sample and coordinate).
std::string plot_data_csv(const Trajectory& traj);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable parse_csv(const std::string& text);

/// {check_name: {max_residual, tolerance, samples, pass}} in report order.
json report_to_json(const VerificationReport& report);

/// Shortest locale-independent 17-significant-digit form.
std::string format_double(double v);

// ---------------------------------------------------------------- commands

struct RunResult {
    VerificationReport report;
    json document;                                     ///< printed on stdout
    std::vector<std::pair<std::string, std::string>> files;  ///< (relative path, content)
    int exit_code() const { return report.all_pass() ? 0 : 1; }
};

RunResult simulate(const RunPlan& plan);
RunResult verify(const RunPlan& plan);
RunResult inverse(const RunPlan& plan, const std::string& route);

std::string catalog_list();
json catalog_show(const std::string& name);

/// Machine-readable error record for any library error.
json error_record(const std::exception& e);

}  // namespace descartes::cli
