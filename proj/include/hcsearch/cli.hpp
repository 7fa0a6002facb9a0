#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "curve.hpp"
#include "simulator.hpp"
#include "spectral.hpp"

namespace hcsearch::cli {

enum class Mode { simulate, spectral, compare, bound };
enum class OutputFormat { csv, json };

enum ExitCode : int { ok = 0, incomplete = 2, invalid_input = 3, resource_cap = 4 };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::simulate: return "simulate";
        case Mode::spectral: return "spectral";
        case Mode::compare: return "compare";
        case Mode::bound: return "bound";
    }
    return "unknown";
}

inline const char* to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what, int line = -1)
        : std::runtime_error(compose(field, what, line)), field_(field), line_(line) {}
    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    static std::string compose(const std::string& field, const std::string& what, int line) {
        std::string s = "config";
        if (line >= 0) s += " line " + std::to_string(line + 1);
        if (!field.empty()) s += " field '" + field + "'";
        return s + ": " + what;
    }
    std::string field_;
    int line_;
};

struct RunConfig {
    Mode mode = Mode::spectral;
    int n = 0;
    std::vector<Position> solutions;
    std::optional<int> random_solutions;
    std::uint64_t seed = 1;
    std::string theta_step = "pi/2000";
    double refine_tol = 1e-12;
    double zero_sv_tol = 1e-8;
    std::int64_t t_max = 1000;
    std::string out = "hcsearch";
    OutputFormat format = OutputFormat::csv;
    bool all_components = false;
    int direct_limit = default_direct_limit;

    bool operator==(const RunConfig&) const = default;
};

inline Mode parse_mode(const std::string& s) {
    if (s == "simulate") return Mode::simulate;
    if (s == "spectral") return Mode::spectral;
    if (s == "compare") return Mode::compare;
    if (s == "bound") return Mode::bound;
    throw ConfigError("mode", "unknown mode '" + s + "'");
}

inline OutputFormat parse_format(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    throw ConfigError("format", "unknown format '" + s + "'");
}

// Angles as plain numbers or in terms of pi: "pi", "pi/K", "A*pi", "A*pi/K".
inline double parse_angle(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    const auto number = [&](const std::string& part) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            throw ConfigError("theta_step", "cannot parse angle '" + text + "'");
        }
        if (used != part.size()) throw ConfigError("theta_step", "cannot parse angle '" + text + "'");
        return v;
    };
    const auto at = s.find("pi");
    if (at == std::string::npos) return number(s);
    double scale = 1.0;
    if (at > 0) {
        if (s[at - 1] != '*') throw ConfigError("theta_step", "cannot parse angle '" + text + "'");
        scale = number(s.substr(0, at - 1));
    }
    const std::string rest = s.substr(at + 2);
    if (rest.empty()) return scale * pi;
    if (rest[0] != '/') throw ConfigError("theta_step", "cannot parse angle '" + text + "'");
    const double k = number(rest.substr(1));
    if (k == 0) throw ConfigError("theta_step", "zero divisor in angle '" + text + "'");
    return scale * pi / k;
}

namespace detail {

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, "unexpected value '" + YAML::Dump(node) + "'", node.Mark().line);
    }
}

}  // namespace detail

// Key/value document with arrays; JSON is accepted as a subset.
inline RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.msg, e.mark.line);
    }
    if (root.IsNull()) return {};
    if (!root.IsMap()) throw ConfigError("", "top level must be a mapping", root.Mark().line);
    RunConfig c;
    int n_line = -1;
    std::vector<int> solution_lines;
    for (const auto& kv : root) {
        const std::string key = kv.first.as<std::string>();
        const YAML::Node& v = kv.second;
        if (key == "n") {
            c.n = detail::scalar<int>(v, key);
            if (c.n < 1 || c.n > max_dimension) throw ConfigError(key, "must lie in [1, 64]", v.Mark().line);
            n_line = v.Mark().line;
        } else if (key == "solutions") {
            if (!v.IsSequence()) throw ConfigError(key, "expected an array", v.Mark().line);
            c.solutions.clear();
            solution_lines.clear();
            for (const auto& item : v) {
                const Position p = detail::scalar<Position>(item, key);
                for (std::size_t k = 0; k < c.solutions.size(); ++k)
                    if (c.solutions[k] == p)
                        throw ConfigError(key, "duplicate solution " + std::to_string(p), item.Mark().line);
                c.solutions.push_back(p);
                solution_lines.push_back(item.Mark().line);
            }
        } else if (key == "random_solutions") {
            c.random_solutions = detail::scalar<int>(v, key);
        } else if (key == "seed") {
            c.seed = detail::scalar<std::uint64_t>(v, key);
        } else if (key == "mode") {
            const auto text = detail::scalar<std::string>(v, key);
            try {
                c.mode = parse_mode(text);
            } catch (const ConfigError&) {
                throw ConfigError(key, "unknown mode '" + text + "'", v.Mark().line);
            }
        } else if (key == "theta_step") {
            c.theta_step = detail::scalar<std::string>(v, key);
            try {
                parse_angle(c.theta_step);
            } catch (const ConfigError&) {
                throw ConfigError(key, "cannot parse angle '" + c.theta_step + "'", v.Mark().line);
            }
        } else if (key == "refine_tol") {
            c.refine_tol = detail::scalar<double>(v, key);
        } else if (key == "zero_sv_tol") {
            c.zero_sv_tol = detail::scalar<double>(v, key);
        } else if (key == "t_max") {
            c.t_max = detail::scalar<std::int64_t>(v, key);
        } else if (key == "out") {
            c.out = detail::scalar<std::string>(v, key);
        } else if (key == "format") {
            try {
                c.format = parse_format(detail::scalar<std::string>(v, key));
            } catch (const ConfigError&) {
                throw ConfigError(key, "unknown format", v.Mark().line);
            }
        } else if (key == "all_components") {
            c.all_components = detail::scalar<bool>(v, key);
        } else if (key == "direct_limit") {
            c.direct_limit = detail::scalar<int>(v, key);
        } else {
            throw ConfigError(key, "unknown key", kv.first.Mark().line);
        }
    }
    if (n_line >= 0 && c.n < max_dimension)
        for (std::size_t k = 0; k < c.solutions.size(); ++k)
            if (c.solutions[k] >> c.n)
                throw ConfigError("solutions", "position " + std::to_string(c.solutions[k]) + " out of range for n = " +
                                                   std::to_string(c.n), solution_lines[k]);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j = {{"mode", to_string(c.mode)},       {"n", c.n},
                        {"solutions", c.solutions},        {"seed", c.seed},
                        {"theta_step", c.theta_step},      {"refine_tol", c.refine_tol},
                        {"zero_sv_tol", c.zero_sv_tol},    {"t_max", c.t_max},
                        {"out", c.out},                    {"format", to_string(c.format)},
                        {"all_components", c.all_components}, {"direct_limit", c.direct_limit}};
    if (c.random_solutions) j["random_solutions"] = *c.random_solutions;
    return j;
}

inline void validate(const RunConfig& c) {
    if (c.n < 1 || c.n > max_dimension) throw ConfigError("n", "must lie in [1, 64]");
    if (c.mode != Mode::simulate && c.n < 2) throw ConfigError("n", "spectral modes need n >= 2");
    if (c.random_solutions && !c.solutions.empty())
        throw ConfigError("solutions", "give either solutions or random_solutions");
    if (!c.random_solutions && c.solutions.empty()) throw ConfigError("solutions", "must be non-empty");
    if (c.random_solutions && (*c.random_solutions < 1 || (c.n < 63 && *c.random_solutions > (1LL << c.n))))
        throw ConfigError("random_solutions", "must lie in [1, 2^n]");
    if (c.t_max < 0 || c.t_max > max_curve_length) throw ConfigError("t_max", "must lie in [0, 100000]");
    const double step = parse_angle(c.theta_step);
    if (!(step > 0 && step < pi / 4)) throw ConfigError("theta_step", "must lie in (0, pi/4)");
    if (!(c.refine_tol > 0)) throw ConfigError("refine_tol", "must be positive");
    if (!(c.zero_sv_tol > 0)) throw ConfigError("zero_sv_tol", "must be positive");
}

inline ProblemSpec make_spec(const RunConfig& c) {
    if (!c.random_solutions) {
        try {
            return ProblemSpec(c.n, c.solutions);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("solutions", e.what());
        }
    }
    std::mt19937_64 rng(c.seed);
    std::set<Position> picked;
    const Position mask = c.n >= 64 ? ~Position{0} : (Position{1} << c.n) - 1;
    while (static_cast<int>(picked.size()) < *c.random_solutions) picked.insert(rng() & mask);
    return ProblemSpec(c.n, {picked.begin(), picked.end()});
}

inline ScanOptions scan_options(const RunConfig& c) {
    ScanOptions o;
    o.theta_step = parse_angle(c.theta_step);
    o.refine_tol = c.refine_tol;
    o.zero_sv_tol = c.zero_sv_tol;
    return o;
}

struct RunSummary {
    std::optional<double> max_p;
    std::optional<std::int64_t> argmax_t;
    std::optional<double> bound;
    std::optional<double> max_abs_diff;
    std::optional<std::int64_t> effective_dim;
    std::optional<std::int64_t> found;
    std::optional<bool> complete;

    bool operator==(const RunSummary&) const = default;
};

struct RunOutcome {
    int exit_code = ok;
    std::string message;
    RunSummary summary;
    std::vector<std::string> files;
    nlohmann::json diagnostics;
};

namespace detail {

inline std::string fmt10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& text, std::vector<std::string>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    files.push_back(path);
}

struct PhaseRow {
    double phi;
    int multiplicity;
    int l;
    double abs_s;
    Complex u;
    PhaseKind kind;
};

inline std::vector<PhaseRow> phase_rows(const SpectralDecomposition& d, bool all) {
    std::vector<PhaseRow> rows;
    for (const auto& c : d.components)
        for (int l = 0; l < c.multiplicity; ++l) {
            const double a = std::abs(c.s(l));
            if (!all && a <= 1e-10) continue;
            rows.push_back({c.phi, c.multiplicity, l + 1, a, c.u(l), c.kind});
        }
    return rows;
}

inline std::string phases_csv(const std::vector<PhaseRow>& rows) {
    std::string s = "phi,multiplicity,l,abs_s,re_u,im_u,kind\n";
    for (const auto& r : rows)
        s += fmt10(r.phi) + "," + std::to_string(r.multiplicity) + "," + std::to_string(r.l) + "," + fmt10(r.abs_s) +
             "," + fmt10(r.u.real()) + "," + fmt10(r.u.imag()) + "," + hcsearch::to_string(r.kind) + "\n";
    return s;
}

inline nlohmann::json phases_json(const std::vector<PhaseRow>& rows) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rows)
        a.push_back({{"phi", r.phi},
                     {"multiplicity", r.multiplicity},
                     {"l", r.l},
                     {"abs_s", r.abs_s},
                     {"re_u", r.u.real()},
                     {"im_u", r.u.imag()},
                     {"kind", hcsearch::to_string(r.kind)}});
    return a;
}

inline std::string curve_csv(const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
    std::string s = "t";
    for (const auto& c : cols) s += "," + c.first;
    s += "\n";
    const std::size_t len = cols.front().second->size();
    for (std::size_t t = 0; t < len; ++t) {
        s += std::to_string(t);
        for (const auto& c : cols) s += "," + fmt10((*c.second)[t]);
        s += "\n";
    }
    return s;
}

}  // namespace detail

inline nlohmann::json to_json(const RunSummary& r) {
    nlohmann::json j = nlohmann::json::object();
    if (r.max_p) j["max_p"] = *r.max_p;
    if (r.argmax_t) j["argmax_t"] = *r.argmax_t;
    if (r.bound) j["bound"] = *r.bound;
    if (r.max_abs_diff) j["max_abs_diff"] = *r.max_abs_diff;
    if (r.effective_dim) j["effective_dim"] = *r.effective_dim;
    if (r.found) j["found"] = *r.found;
    if (r.complete) j["complete"] = *r.complete;
    return j;
}

struct RunRecord {
    RunConfig config;
    RunSummary summary;
    int exit_code = ok;
};

// Reads a diagnostics document back into configuration and results.
inline RunRecord parse_diagnostics(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunRecord r;
    r.config = parse_config(j.at("config").dump());
    r.exit_code = j.at("exit_code").get<int>();
    const auto& s = j.at("results");
    if (s.contains("max_p")) r.summary.max_p = s["max_p"].get<double>();
    if (s.contains("argmax_t")) r.summary.argmax_t = s["argmax_t"].get<std::int64_t>();
    if (s.contains("bound")) r.summary.bound = s["bound"].get<double>();
    if (s.contains("max_abs_diff")) r.summary.max_abs_diff = s["max_abs_diff"].get<double>();
    if (s.contains("effective_dim")) r.summary.effective_dim = s["effective_dim"].get<std::int64_t>();
    if (s.contains("found")) r.summary.found = s["found"].get<std::int64_t>();
    if (s.contains("complete")) r.summary.complete = s["complete"].get<bool>();
    return r;
}

inline RunOutcome run(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    RunOutcome out;
    nlohmann::json diag;
    diag["config"] = to_json(config);
    nlohmann::json results_doc;
    try {
        validate(config);
        const ProblemSpec spec = make_spec(config);
        diag["solutions"] = spec.solutions();
        const ScanOptions opt = scan_options(config);
        std::optional<SpectralDecomposition> dec;
        std::optional<SuccessCurve> spectral, direct;

        if (config.mode != Mode::simulate) {
            dec = decompose(spec, opt);
            out.summary.effective_dim = dec->effective_dim;
            out.summary.found = dec->found;
            out.summary.complete = dec->complete;
            out.summary.bound = upper_bound(*dec);
            diag["scan"] = {{"theta_step", dec->options.theta_step},
                            {"refine_tol", dec->options.refine_tol},
                            {"zero_sv_tol", dec->options.zero_sv_tol},
                            {"singular_exclusion", dec->options.exclusion()},
                            {"rescanned", dec->rescanned},
                            {"samples", dec->samples},
                            {"criterion_minima", dec->minima},
                            {"discarded_minima", dec->discarded_minima},
                            {"count_near_zero", dec->count_near_zero},
                            {"count_near_pi", dec->count_near_pi},
                            {"nonzero_components", dec->nonzero_components()}};
            spectral = probability_curve(*dec, config.t_max);
        }
        if (config.mode == Mode::simulate || config.mode == Mode::compare)
            direct = simulate_curve(spec, config.t_max, config.direct_limit);

        const SuccessCurve& main = spectral ? *spectral : *direct;
        out.summary.max_p = main.max_p;
        out.summary.argmax_t = main.argmax_t;

        std::vector<double> diff;
        if (spectral && direct) {
            double worst = 0;
            for (std::size_t t = 0; t < spectral->probabilities.size(); ++t) {
                diff.push_back(std::abs(spectral->probabilities[t] - direct->probabilities[t]));
                worst = std::max(worst, diff.back());
            }
            out.summary.max_abs_diff = worst;
        }

        const bool csv = config.format == OutputFormat::csv;
        std::vector<detail::PhaseRow> rows;
        if (dec) rows = detail::phase_rows(*dec, config.all_components);

        switch (config.mode) {
            case Mode::simulate:
                if (csv) detail::write_text(config.out + ".curve.csv", detail::curve_csv({{"p", &direct->probabilities}}), out.files);
                else results_doc["curve"] = {{"p", direct->probabilities}};
                break;
            case Mode::spectral:
                if (csv) {
                    detail::write_text(config.out + ".phases.csv", detail::phases_csv(rows), out.files);
                    detail::write_text(config.out + ".curve.csv", detail::curve_csv({{"p", &spectral->probabilities}}), out.files);
                } else {
                    results_doc["phases"] = detail::phases_json(rows);
                    results_doc["curve"] = {{"p", spectral->probabilities}};
                }
                break;
            case Mode::compare:
                if (csv) {
                    detail::write_text(config.out + ".phases.csv", detail::phases_csv(rows), out.files);
                    detail::write_text(config.out + ".compare.csv",
                                       detail::curve_csv({{"p_spectral", &spectral->probabilities},
                                                          {"p_direct", &direct->probabilities},
                                                          {"abs_diff", &diff}}),
                                       out.files);
                } else {
                    results_doc["phases"] = detail::phases_json(rows);
                    results_doc["curve"] = {{"p_spectral", spectral->probabilities},
                                            {"p_direct", direct->probabilities},
                                            {"abs_diff", diff}};
                }
                break;
            case Mode::bound:
                if (csv)
                    detail::write_text(config.out + ".bound.csv",
                                       "bound,max_p,argmax_t\n" + detail::fmt10(*out.summary.bound) + "," +
                                           detail::fmt10(main.max_p) + "," + std::to_string(main.argmax_t) + "\n",
                                       out.files);
                else
                    results_doc["bound"] = *out.summary.bound;
                break;
        }
        if (!csv) detail::write_text(config.out + ".results.json", results_doc.dump(2) + "\n", out.files);
        if (dec && !dec->complete) {
            out.exit_code = incomplete;
            out.message = "decomposition incomplete: found " + std::to_string(dec->found) + " of " +
                          std::to_string(dec->effective_dim);
        }
    } catch (const ConfigError& e) {
        out.exit_code = invalid_input;
        out.message = e.what();
    } catch (const ResourceLimitError& e) {
        out.exit_code = resource_cap;
        out.message = e.what();
    } catch (const std::length_error& e) {
        out.exit_code = resource_cap;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.exit_code = invalid_input;
        out.message = e.what();
    }
    diag["exit_code"] = out.exit_code;
    diag["status"] = out.exit_code == ok ? "ok"
                     : out.exit_code == incomplete ? "incomplete"
                     : out.exit_code == invalid_input ? "invalid_input"
                                                      : "resource_cap";
    if (!out.message.empty()) diag["message"] = out.message;
    diag["results"] = to_json(out.summary);
    diag["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.diagnostics = diag;
    try {
        detail::write_text(config.out + ".diagnostics.json", diag.dump(2) + "\n", out.files);
    } catch (const std::runtime_error& e) {
        if (out.exit_code == ok) {
            out.exit_code = invalid_input;
            out.message = e.what();
        }
    }
    return out;
}

}  // namespace hcsearch::cli
