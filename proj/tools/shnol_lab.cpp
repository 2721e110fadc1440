#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "shnol/criticality.hpp"
#include "shnol/scenario.hpp"

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const shnol::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::vector<int> parse_radii(const std::string& csv) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(std::stoi(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shnol-lab: spectral-inclusion certificates on weighted graphs"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario and write reports");
    std::string run_config, run_builtin, run_out = "out";
    unsigned long long run_seed = 0;
    bool run_plots = false;
    run->add_option("config", run_config, "scenario JSON file");
    run->add_option("--builtin", run_builtin, "builtin scenario name");
    run->add_option("--out", run_out, "output directory");
    run->add_option("--seed", run_seed, "seed for sampled audits");
    run->add_flag("--plots", run_plots, "emit SVG plots");

    // criticality
    auto* crit = app.add_subcommand("criticality", "criticality verdict for a graph file");
    std::string crit_file, crit_radii = "4,8,16,32", crit_out;
    crit->add_option("graph", crit_file, "graph JSON file")->required();
    crit->add_option("--radii", crit_radii, "comma-separated exhaustion indices");
    crit->add_option("--out", crit_out, "output directory (optional)");

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "truncation spectrum of a graph file");
    std::string spec_file;
    int spec_region = 4;
    spec->add_option("graph", spec_file, "graph JSON file")->required();
    spec->add_option("--region", spec_region, "exhaustion index of the restriction");

    // list
    auto* list = app.add_subcommand("list", "list builtin scenarios");
    bool list_json = false;
    list->add_flag("--json", list_json, "machine-readable descriptors");

    // export
    auto* exp = app.add_subcommand("export", "canonical re-serialization of a graph file");
    std::string exp_file, exp_out;
    exp->add_option("graph", exp_file, "graph JSON file")->required();
    exp->add_option("--out", exp_out, "output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        return guarded([&]() -> int {
            if (run_config.empty() == run_builtin.empty())
                throw shnol::ConfigError("provide exactly one of <config> or --builtin");
            shnol::Scenario sc = run_builtin.empty()
                                     ? shnol::load_scenario(run_config)
                                     : shnol::builtin_scenario(run_builtin);
            shnol::RunResult rr = shnol::run_scenario(sc, run_out, run_seed, run_plots);
            std::cout << sc.name << ": " << rr.message << "\n";
            return rr.exit_code;
        });
    }
    if (crit->parsed()) {
        return guarded([&]() -> int {
            shnol::GraphModel model = shnol::load_graph(crit_file);
            shnol::FormHandle f{model.source, shnol::Potential::zero(), 1.0};
            shnol::CriticalityOptions opts;
            opts.radii = parse_radii(crit_radii);
            shnol::CriticalityVerdict v =
                shnol::detect_criticality(f, model.exhaustion, opts);
            const char* kind = v.kind == shnol::CriticalityKind::Critical ? "Critical"
                               : v.kind == shnol::CriticalityKind::Subcritical
                                   ? "Subcritical"
                                   : "NotNonnegative";
            std::cout << "verdict: " << kind << "\n";
            for (std::size_t i = 0; i < v.evidence.radii.size(); ++i)
                std::cout << "  n=" << v.evidence.radii[i]
                          << "  cap=" << v.evidence.cap[i] << "\n";
            if (!v.note.empty()) std::cout << "note: " << v.note << "\n";
            if (!crit_out.empty()) {
                shnol::Scenario sc;
                sc.name = "criticality";
                sc.task = shnol::Scenario::Task::Criticality;
                sc.graph_file = crit_file;
                sc.criticality_radii = opts.radii;
                shnol::run_scenario(sc, crit_out);
            }
            return 0;
        });
    }
    if (spec->parsed()) {
        return guarded([&]() -> int {
            shnol::GraphModel model = shnol::load_graph(spec_file);
            shnol::FormHandle f{model.source, shnol::Potential::zero(), 1.0};
            std::vector<shnol::VertexId> region = model.exhaustion.region(spec_region);
            shnol::SparseSymOp op = shnol::dirichlet_operator(f, region);
            std::vector<double> vals = shnol::dense_spectrum(op);
            for (double v : vals) std::cout << v << "\n";
            return 0;
        });
    }
    if (list->parsed()) {
        return guarded([&]() -> int {
            auto builtins = shnol::list_builtins();
            if (list_json) {
                nlohmann::json j = nlohmann::json::array();
                for (const auto& b : builtins)
                    j.push_back({{"name", b.name}, {"description", b.description}});
                std::cout << j.dump(1) << "\n";
            } else {
                for (const auto& b : builtins)
                    std::cout << b.name << "  -  " << b.description << "\n";
            }
            return 0;
        });
    }
    if (exp->parsed()) {
        return guarded([&]() -> int {
            shnol::GraphModel model = shnol::load_graph(exp_file);
            std::string text = shnol::graph_to_json(*model.source);
            if (exp_out.empty()) {
                std::cout << text;
            } else {
                shnol::save_graph(*model.source, exp_out);
            }
            return 0;
        });
    }
    return 0;
}
