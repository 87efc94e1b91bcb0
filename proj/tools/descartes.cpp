// descartes: batch front end (simulate, verify, inverse, catalog).
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "descartes/cli.hpp"
#include "descartes/errors.hpp"

namespace fs = std::filesystem;
using namespace descartes;

namespace {

void write_files(const cli::RunResult& r, const std::string& dir) {
    if (r.files.empty()) return;
    fs::create_directories(dir);
    for (const auto& [name, content] : r.files) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
        out << content;
        if (!out) throw Error("write failed: " + (fs::path(dir) / name).string());
    }
}

int emit(const cli::RunResult& r, const cli::RunPlan& plan) {
    write_files(r, plan.output.dir);
    std::cout << r.document.dump(2) << "\n";
    return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cartesian-field simulation, verification and inverse problems for constrained mechanics"};
    app.require_subcommand(1);

    std::string spec, out, route, name;
    std::size_t grid = 0;
    std::uint64_t seed = 0;
    bool plot = false;

    auto* sim = app.add_subcommand("simulate", "integrate the trajectories of a spec and write CSV files");
    sim->add_option("--spec", spec, "run specification (JSON)")->required();
    sim->add_option("--out", out, "output directory (overrides output.dir)");
    sim->add_flag("--emit-plot-data", plot, "also write tidy t,series,value CSV files");

    auto* ver = app.add_subcommand("verify", "run the verification battery and print the report");
    ver->add_option("--spec", spec, "run specification (JSON)")->required();
    auto* grid_opt = ver->add_option("--grid", grid, "number of random grid points for pointwise checks");
    auto* seed_opt = ver->add_option("--seed", seed, "seed of the grid generator");
    ver->add_option("--out", out, "output directory (overrides output.dir)");

    auto* inv = app.add_subcommand("inverse", "synthesize forces or potentials for a family of orbits");
    inv->add_option("--route", route, "route")
        ->required()
        ->check(CLI::IsMember({"dainelli", "suslov", "joukovski", "stackel", "bertrand"}));
    inv->add_option("--spec", spec, "inverse specification (JSON)")->required();
    inv->add_option("--out", out, "output directory (overrides output.dir)");

    auto* cat = app.add_subcommand("catalog", "list or describe built-in systems");
    cat->require_subcommand(1);
    auto* cat_list = cat->add_subcommand("list", "list systems and presets");
    auto* cat_show = cat->add_subcommand("show", "describe one system as JSON");
    cat_show->add_option("NAME", name, "system name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // usage errors share the error exit status; --help still exits 0
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (cat_list->parsed()) {
            std::cout << cli::catalog_list();
            return 0;
        }
        if (cat_show->parsed()) {
            std::cout << cli::catalog_show(name).dump(2) << "\n";
            return 0;
        }
        cli::RunPlan plan = cli::load_spec(spec);
        if (!out.empty()) plan.output.dir = out;
        if (sim->parsed()) {
            if (plot) plan.output.plot_data = true;
            return emit(cli::simulate(plan), plan);
        }
        if (ver->parsed()) {
            if (grid_opt->count()) plan.verify_grid = grid;
            if (seed_opt->count()) plan.seed = seed;
            return emit(cli::verify(plan), plan);
        }
        return emit(cli::inverse(plan, route), plan);
    } catch (const std::exception& e) {
        std::cout << cli::error_record(e).dump(2) << "\n";
        std::cerr << "descartes: " << e.what() << "\n";
        return 2;
    }
}
