#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hcsearch/cli.hpp>

namespace {

struct Flags {
    std::optional<std::string> config;
    std::optional<int> n;
    std::optional<std::string> solutions;
    std::optional<int> random_solutions;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> theta_step;
    std::optional<double> refine_tol;
    std::optional<double> zero_sv_tol;
    std::optional<std::int64_t> t_max;
    std::optional<std::string> out;
    std::optional<std::string> format;
    bool all_components = false;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "key/value config file; flags override it");
    app->add_option("--n", f.n, "hypercube dimension");
    app->add_option("--solutions", f.solutions, "comma-separated marked positions");
    app->add_option("--random-solutions", f.random_solutions, "draw this many marked positions at random");
    app->add_option("--seed", f.seed, "seed for --random-solutions");
    app->add_option("--theta-step", f.theta_step, "phase scan step, e.g. pi/2000");
    app->add_option("--refine-tol", f.refine_tol, "root refinement tolerance");
    app->add_option("--zero-sv-tol", f.zero_sv_tol, "relative zero singular value threshold");
    app->add_option("--t-max", f.t_max, "last iteration of the success curve");
    app->add_option("--out", f.out, "output path prefix");
    app->add_option("--format", f.format, "csv or json");
    app->add_flag("--all-components", f.all_components, "also list components with zero overlap");
}

std::vector<hcsearch::Position> parse_positions(const std::string& text) {
    std::vector<hcsearch::Position> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        try {
            out.push_back(std::stoull(item, &used));
        } catch (const std::exception&) {
            throw hcsearch::cli::ConfigError("solutions", "cannot parse '" + item + "'");
        }
        if (used != item.size()) throw hcsearch::cli::ConfigError("solutions", "cannot parse '" + item + "'");
    }
    return out;
}

hcsearch::cli::RunConfig merge(const Flags& f, hcsearch::cli::Mode mode) {
    using namespace hcsearch::cli;
    RunConfig c = f.config ? load_config(*f.config) : RunConfig{};
    c.mode = mode;
    if (f.n) c.n = *f.n;
    if (f.solutions) {
        c.solutions = parse_positions(*f.solutions);
        c.random_solutions.reset();
    }
    if (f.random_solutions) {
        c.random_solutions = *f.random_solutions;
        c.solutions.clear();
    }
    if (f.seed) c.seed = *f.seed;
    if (f.theta_step) c.theta_step = *f.theta_step;
    if (f.refine_tol) c.refine_tol = *f.refine_tol;
    if (f.zero_sv_tol) c.zero_sv_tol = *f.zero_sv_tol;
    if (f.t_max) c.t_max = *f.t_max;
    if (f.out) c.out = *f.out;
    if (f.format) c.format = parse_format(*f.format);
    if (f.all_components) c.all_components = true;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace hcsearch::cli;
    CLI::App app{"Quantum walk search on the hypercube: direct simulation and eigenphase analysis"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, Mode>> modes = {{"simulate", Mode::simulate},
                                                             {"spectral", Mode::spectral},
                                                             {"compare", Mode::compare},
                                                             {"bound", Mode::bound}};
    const std::vector<std::string> help = {"direct state-vector simulation of the success curve",
                                           "eigenphase decomposition and the success curve it implies",
                                           "spectral and direct curves side by side",
                                           "upper bound on the success probability"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        subs.push_back(app.add_subcommand(modes[i].first, help[i]));
        add_common(subs.back(), flags);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : invalid_input;
    }

    Mode mode = Mode::spectral;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) mode = modes[i].second;

    RunConfig config;
    try {
        config = merge(flags, mode);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return invalid_input;
    }

    const RunOutcome r = run(config);
    if (!r.message.empty()) std::cerr << (r.exit_code == incomplete ? "warning: " : "error: ") << r.message << "\n";
    const auto& s = r.summary;
    if (s.effective_dim) std::cout << "effective_dim " << *s.effective_dim << "  found " << *s.found << "\n";
    if (s.max_p) std::cout << "max_p " << *s.max_p << "  at t = " << *s.argmax_t << "\n";
    if (s.bound) std::cout << "bound " << *s.bound << "\n";
    if (s.max_abs_diff) std::cout << "max |spectral - direct| " << *s.max_abs_diff << "\n";
    for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
    return r.exit_code;
}
