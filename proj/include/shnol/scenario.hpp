#pragma once

#include <string>
#include <vector>

#include "shnol/engine.hpp"

namespace shnol {

inline constexpr const char* kVersion = "0.1.0";

/// A reproducible experiment: graph, potentials, eigenfunction, radii,
/// pass thresholds. Parsed from versioned JSON or taken from the builtins.
struct Scenario {
    enum class Task { Shnol, Green, Coupling, Criticality };

    std::string name;
    Task task = Task::Shnol;

    // graph
    std::string generator;    // "lattice", "tree", or "" (file)
    int dim = 1;              // lattice
    int degree = 3;           // tree
    int radius = 8;           // initial materialization / tree depth
    double edge_weight = 0.5;
    std::string graph_file;
    Potential kappa;
    Potential measure = Potential::constant(1.0);

    // shnol task
    Potential W;
    EigenfunctionSpec eigenfunction;
    double lambda = 0.0;
    bool lambda_given = false;
    std::vector<int> radii;
    std::vector<int> criticality_radii;
    int dist_radius = 0;
    int dist_square = 0; // when > 0: reference region is this square (lattice d=2)
    double defect_target = 0.0;
    double dist_target = 0.0;
    bool require_decreasing_defect = true;
    std::string ground_state_mode = "detect"; // or "constant_one"
    int gs_trust_radius = 0;

    // green task
    std::int64_t green_pole_coord = 0;
    int green_radius = 200;
    std::vector<std::int64_t> criticalize_coords; // K as lattice coordinates
    int green_n_max = 512;
    double green_value_tol = 1e-6;
    double green_ratio_tol = 1e-4;
    double comparability_bound = 10.0;
    std::int64_t compare_from = 20, compare_to = 150;

    // coupling task
    std::vector<int> coupling_radii;
    double coupling_target = 0.0;
    double coupling_tol = 5e-3;

    unsigned long long seed = 0;
};

Scenario parse_scenario_json(const std::string& text);
Scenario load_scenario(const std::string& path);

struct BuiltinInfo {
    std::string name;
    std::string description;
};
std::vector<BuiltinInfo> list_builtins();
Scenario builtin_scenario(const std::string& name);

struct RunResult {
    int exit_code = 0; // 0 pass, 1 violation/fail, 2 config error
    bool pass = false;
    std::string message;
};

/// Executes the scenario and writes report.json, table.csv and (optionally)
/// SVG plots into out_dir. Files are written atomically.
RunResult run_scenario(const Scenario& sc, const std::string& out_dir,
                       unsigned long long seed = 0, bool plots = false);

/// Line chart helper shared by the runner (log10 y-axis when positive data).
std::string svg_line_chart(const std::string& title,
                           const std::vector<std::string>& series_names,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys,
                           bool log_log);

} // namespace shnol
