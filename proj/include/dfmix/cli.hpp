#pragma once

// Batch front end: config ingestion and execution of the four run modes.
//
// Config grammar: `[section]` headers, `key = value` lines, `#` comments. Sections and keys:
//   [run]          mode (stationary|transient|study|sweep), tol, seed, output
//   [mesh]         nx, ny, x0, x1, y0, y1
//   [coefficients] alpha, beta, gamma, phi | file (per cell: alpha beta gamma phi)
//                  trajectory (per step k = 0..K: alpha beta gamma), lipschitz_alpha,
//                  lipschitz_beta, lipschitz_gamma, lipschitz_f
//   [source]       value | file (one value per cell)
//   [boundary]     value | file (one value per boundary edge slot)
//   [initial]      value | file (transient S0)
//   [schedule]     eps0, factor, max_stages, stage_tol
//   [time]         horizon, steps
//   [study]        case (sine|constant), meshes (comma separated)
//   [sweep]        samples, operator_pairs
//   [output]       vtk_every (transient; 0 writes the final state only)
// Relative file paths resolve against the config file's directory.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfmix/transient.hpp"
#include "dfmix/verify.hpp"
#include "dfmix/vtk.hpp"

namespace dfmix::cli {

enum class Mode { stationary, transient, study, sweep };

inline const char* mode_name(Mode m)
{
    switch (m) {
    case Mode::stationary: return "stationary";
    case Mode::transient: return "transient";
    case Mode::study: return "study";
    case Mode::sweep: return "sweep";
    }
    return "?";
}

/// Parse (line > 0) or validation (line == 0) failure.
class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

struct ConfigEntry {
    std::string value;
    int line = 0;
};

using ConfigSections = std::map<std::string, std::map<std::string, ConfigEntry>>;

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline ConfigSections parse_config(const std::string& text)
{
    static const std::map<std::string, std::set<std::string>> known = {
        {"run", {"mode", "tol", "seed", "output"}},
        {"mesh", {"nx", "ny", "x0", "x1", "y0", "y1"}},
        {"coefficients",
         {"alpha", "beta", "gamma", "phi", "file", "trajectory", "lipschitz_alpha",
          "lipschitz_beta", "lipschitz_gamma", "lipschitz_f"}},
        {"source", {"value", "file"}},
        {"boundary", {"value", "file"}},
        {"initial", {"value", "file"}},
        {"schedule", {"eps0", "factor", "max_stages", "stage_tol"}},
        {"time", {"horizon", "steps"}},
        {"study", {"case", "meshes"}},
        {"sweep", {"samples", "operator_pairs"}},
        {"output", {"vtk_every"}},
    };
    ConfigSections out;
    std::istringstream is(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::string s = trim(raw.substr(0, raw.find('#')));
        if (s.empty())
            continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw IngestError("unterminated section header '" + s + "'", line);
            section = trim(s.substr(1, s.size() - 2));
            if (!known.count(section))
                throw IngestError("unknown section [" + section + "]", line);
            out[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw IngestError("expected 'key = value', got '" + s + "'", line);
        if (section.empty())
            throw IngestError("key outside of any section", line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!known.at(section).count(key))
            throw IngestError("unknown key '" + key + "' in [" + section + "]", line);
        if (value.empty())
            throw IngestError("empty value for '" + key + "'", line);
        if (out[section].count(key))
            throw IngestError("duplicate key '" + key + "' in [" + section + "]", line);
        out[section][key] = {value, line};
    }
    return out;
}

/// Validated run description with the solver inputs already built.
struct RunConfig {
    Mode mode = Mode::stationary;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    std::string output = "out";
    int nx = 0, ny = 0;
    Rectangle domain{};
    ContinuationSchedule schedule{};
    int vtk_every = 0;

    MeshPtr mesh;
    MixedSystem system;          // stationary
    TransientProblem problem;    // transient
    DtAdmissibility admissibility;
    ManufacturedCase study_case; // study
    std::string study_case_name;
    std::vector<int> study_meshes;
    std::size_t sweep_samples = 100000;
    int operator_pairs = 1000;
};

namespace detail {

struct Reader {
    const ConfigSections& cfg;
    std::filesystem::path base;

    const ConfigEntry* find(const std::string& sec, const std::string& key) const
    {
        const auto s = cfg.find(sec);
        if (s == cfg.end())
            return nullptr;
        const auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }
    bool has(const std::string& sec, const std::string& key) const { return find(sec, key) != nullptr; }

    double number(const std::string& sec, const std::string& key, std::optional<double> def = {}) const
    {
        const ConfigEntry* e = find(sec, key);
        if (!e) {
            if (def)
                return *def;
            throw IngestError("missing required key '" + key + "' in [" + sec + "]");
        }
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(e->value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != e->value.size() || !std::isfinite(v))
            throw IngestError("'" + key + "' is not a finite number: '" + e->value + "'", e->line);
        return v;
    }

    long integer(const std::string& sec, const std::string& key, std::optional<long> def = {}) const
    {
        const ConfigEntry* e = find(sec, key);
        if (!e) {
            if (def)
                return *def;
            throw IngestError("missing required key '" + key + "' in [" + sec + "]");
        }
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(e->value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != e->value.size())
            throw IngestError("'" + key + "' is not an integer: '" + e->value + "'", e->line);
        return v;
    }

    std::string text(const std::string& sec, const std::string& key, const std::string& def) const
    {
        const ConfigEntry* e = find(sec, key);
        return e ? e->value : def;
    }

    std::filesystem::path path(const std::string& sec, const std::string& key) const
    {
        const std::filesystem::path p = find(sec, key)->value;
        return p.is_absolute() ? p : base / p;
    }

    /// Whitespace separated numbers from a file; `expected` entries required.
    std::vector<double> numbers_from(const std::string& sec, const std::string& key,
                                     std::size_t expected) const
    {
        const auto p = path(sec, key);
        std::ifstream is(p);
        if (!is)
            throw IngestError("[" + sec + "] " + key + ": cannot open " + p.string(),
                              find(sec, key)->line);
        std::vector<double> v;
        std::string tok;
        while (is >> tok) {
            if (tok.front() == '#') {
                std::getline(is, tok);
                continue;
            }
            std::size_t pos = 0;
            double x = 0.0;
            try {
                x = std::stod(tok, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != tok.size() || !std::isfinite(x))
                throw IngestError("[" + sec + "] " + key + ": bad number '" + tok + "' in " + p.string());
            v.push_back(x);
        }
        if (v.size() != expected)
            throw IngestError("[" + sec + "] " + key + ": expected " + std::to_string(expected) +
                              " numbers in " + p.string() + ", found " + std::to_string(v.size()));
        return v;
    }

    void exclusive(const std::string& sec, const std::string& a, const std::string& b) const
    {
        if (has(sec, a) && has(sec, b))
            throw IngestError("[" + sec + "]: give either '" + a + "' or '" + b + "', not both",
                              find(sec, b)->line);
    }
};

inline void require_positive_bound(const char* name, double lower)
{
    if (!(lower > 0.0))
        throw IngestError(std::string(name) +
                          " lower bound must be positive (coefficients are assumed bounded "
                          "below by positive constants)");
}

inline void check_coefficients(const CoefficientField& c)
{
    require_positive_bound("alpha", c.alpha_bounds.lower);
    require_positive_bound("beta", c.beta_bounds.lower);
    require_positive_bound("gamma", c.gamma_bounds.lower);
    require_positive_bound("phi", c.phi_bounds.lower);
}

inline ScalarField cell_data(const Reader& r, const std::string& sec, const MeshPtr& mesh,
                             double def)
{
    r.exclusive(sec, "value", "file");
    if (r.has(sec, "file"))
        return {mesh, r.numbers_from(sec, "file", mesh->num_cells())};
    return ScalarField::constant(mesh, r.number(sec, "value", def));
}

inline BoundaryData boundary_data(const Reader& r, const MeshPtr& mesh)
{
    r.exclusive("boundary", "value", "file");
    if (r.has("boundary", "file"))
        return {mesh, r.numbers_from("boundary", "file", mesh->boundary_edges.size())};
    const double v = r.number("boundary", "value", 0.0);
    return {mesh, std::vector<double>(mesh->boundary_edges.size(), v)};
}

inline CoefficientField base_coefficients(const Reader& r, const MeshPtr& mesh)
{
    const std::string sec = "coefficients";
    if (r.has(sec, "file")) {
        for (const char* k : {"alpha", "beta", "gamma", "phi"})
            r.exclusive(sec, k, "file");
        const auto v = r.numbers_from(sec, "file", 4 * mesh->num_cells());
        std::vector<double> a, b, g, p;
        for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
            a.push_back(v[4 * c]);
            b.push_back(v[4 * c + 1]);
            g.push_back(v[4 * c + 2]);
            p.push_back(v[4 * c + 3]);
        }
        return CoefficientField::from_fields({mesh, a}, {mesh, b}, {mesh, g}, {mesh, p});
    }
    return CoefficientField::constant(mesh, r.number(sec, "alpha", 1.0), r.number(sec, "beta", 1.0),
                                      r.number(sec, "gamma", 1.0), r.number(sec, "phi", 1.0));
}

} // namespace detail

/// Parses and validates a config. `base` resolves relative file paths.
inline RunConfig ingest(const std::string& text, const std::filesystem::path& base = ".")
{
    const ConfigSections cfg = parse_config(text);
    const detail::Reader r{cfg, base};
    RunConfig rc;

    const std::string mode = r.text("run", "mode", "");
    if (mode == "stationary")
        rc.mode = Mode::stationary;
    else if (mode == "transient")
        rc.mode = Mode::transient;
    else if (mode == "study")
        rc.mode = Mode::study;
    else if (mode == "sweep")
        rc.mode = Mode::sweep;
    else if (mode.empty())
        throw IngestError("missing required key 'mode' in [run]");
    else
        throw IngestError("unknown mode '" + mode + "' (stationary, transient, study, sweep)",
                          r.find("run", "mode")->line);

    rc.tol = r.number("run", "tol", 1e-10);
    if (!(rc.tol > 0.0))
        throw IngestError("tol must be positive", r.find("run", "tol")->line);
    const long seed = r.integer("run", "seed", 0);
    if (seed < 0)
        throw IngestError("seed must be nonnegative", r.find("run", "seed")->line);
    rc.seed = static_cast<std::uint64_t>(seed);
    rc.output = r.text("run", "output", "out");

    if (rc.mode == Mode::sweep) {
        const long n = r.integer("sweep", "samples", 100000);
        if (n < 1)
            throw IngestError("sweep samples must be >= 1");
        rc.sweep_samples = static_cast<std::size_t>(n);
        rc.operator_pairs = static_cast<int>(r.integer("sweep", "operator_pairs", 1000));
        if (rc.operator_pairs < 0)
            throw IngestError("sweep operator_pairs must be >= 0");
        return rc;
    }

    rc.schedule.eps0 = r.number("schedule", "eps0", rc.schedule.eps0);
    rc.schedule.factor = r.number("schedule", "factor", rc.schedule.factor);
    const int default_stages =
        rc.mode == Mode::transient ? transient_schedule().max_stages : rc.schedule.max_stages;
    rc.schedule.max_stages = static_cast<int>(r.integer("schedule", "max_stages", default_stages));
    rc.schedule.stage_tol = r.number("schedule", "stage_tol", 0.0);
    try {
        rc.schedule.validate();
    } catch (const ContractError& e) {
        throw IngestError(std::string("[schedule]: ") + e.what());
    }

    rc.domain = {r.number("mesh", "x0", 0.0), r.number("mesh", "x1", 1.0), r.number("mesh", "y0", 0.0),
                 r.number("mesh", "y1", 1.0)};
    if (!(rc.domain.x1 > rc.domain.x0 && rc.domain.y1 > rc.domain.y0))
        throw IngestError("[mesh]: rectangle must have x1 > x0 and y1 > y0");

    if (rc.mode == Mode::study) {
        rc.study_case_name = r.text("study", "case", "sine");
        const double a = r.number("coefficients", "alpha", 1.0);
        const double b = r.number("coefficients", "beta", 1.0);
        detail::require_positive_bound("alpha", a);
        if (b < 0.0)
            throw IngestError("beta must be nonnegative");
        if (rc.study_case_name == "sine")
            rc.study_case = sine_case(a, b);
        else if (rc.study_case_name == "constant") {
            rc.study_case.S_exact = [](const Vec2&) { return 1.0; };
            rc.study_case.alpha = a;
            rc.study_case.beta = b;
        } else
            throw IngestError("unknown study case '" + rc.study_case_name + "' (sine, constant)");
        rc.study_case.domain = rc.domain;
        std::stringstream ms(r.text("study", "meshes", "4, 8, 16"));
        std::string tok;
        while (std::getline(ms, tok, ',')) {
            try {
                std::size_t pos = 0;
                const int n = std::stoi(trim(tok), &pos);
                if (pos != trim(tok).size() || n < 1)
                    throw std::invalid_argument("bad");
                rc.study_meshes.push_back(n);
            } catch (const std::exception&) {
                throw IngestError("[study] meshes: bad mesh size '" + trim(tok) + "'");
            }
        }
        if (rc.study_meshes.size() < 3)
            throw IngestError("[study] meshes: at least 3 meshes required");
        return rc;
    }

    const long nx = r.integer("mesh", "nx"), ny = r.integer("mesh", "ny");
    if (nx < 1 || ny < 1)
        throw IngestError("[mesh]: nx and ny must be >= 1");
    rc.nx = static_cast<int>(nx);
    rc.ny = static_cast<int>(ny);
    rc.mesh = build_structured_mesh(rc.nx, rc.ny, rc.domain);

    const CoefficientField coeffs = detail::base_coefficients(r, rc.mesh);
    const ScalarField source = detail::cell_data(r, "source", rc.mesh, 0.0);
    const BoundaryData boundary = detail::boundary_data(r, rc.mesh);

    if (rc.mode == Mode::stationary) {
        if (r.has("coefficients", "trajectory"))
            throw IngestError("[coefficients] trajectory is only meaningful in transient mode",
                              r.find("coefficients", "trajectory")->line);
        detail::check_coefficients(coeffs);
        rc.system.mesh = rc.mesh;
        rc.system.coeffs = coeffs;
        rc.system.source = source;
        rc.system.boundary = boundary;
        try {
            rc.system.validate();
        } catch (const ContractError& e) {
            throw IngestError(e.what());
        }
        return rc;
    }

    // Transient.
    rc.vtk_every = static_cast<int>(r.integer("output", "vtk_every", 0));
    if (rc.vtk_every < 0)
        throw IngestError("[output] vtk_every must be >= 0");
    if (!boundary.homogeneous())
        throw IngestError("transient mode requires homogeneous Dirichlet data (S_b = 0); the "
                          "time-dependent theory covers only the homogeneous case");
    TransientProblem& p = rc.problem;
    p.mesh = rc.mesh;
    p.time.horizon = r.number("time", "horizon");
    const long steps = r.integer("time", "steps");
    if (!(p.time.horizon > 0.0) || steps < 1)
        throw IngestError("[time]: horizon must be positive and steps >= 1");
    p.time.steps = static_cast<int>(steps);
    p.lipschitz = {r.number("coefficients", "lipschitz_alpha", 0.0),
                   r.number("coefficients", "lipschitz_beta", 0.0),
                   r.number("coefficients", "lipschitz_gamma", 0.0),
                   r.number("coefficients", "lipschitz_f", 0.0)};
    if (r.has("coefficients", "trajectory")) {
        if (r.has("coefficients", "file"))
            throw IngestError("[coefficients]: 'trajectory' and 'file' cannot be combined",
                              r.find("coefficients", "trajectory")->line);
        for (const char* k : {"alpha", "beta", "gamma"})
            r.exclusive("coefficients", k, "trajectory");
        const auto K1 = static_cast<std::size_t>(p.time.steps) + 1;
        const auto v = r.numbers_from("coefficients", "trajectory", 3 * K1);
        const double phi = r.number("coefficients", "phi", 1.0);
        for (std::size_t k = 0; k < K1; ++k)
            p.coeffs.push_back(
                CoefficientField::constant(rc.mesh, v[3 * k], v[3 * k + 1], v[3 * k + 2], phi));
    } else {
        p.coeffs.push_back(coeffs);
    }
    for (const auto& c : p.coeffs)
        detail::check_coefficients(c);
    p.sources.push_back(source);
    p.initial = detail::cell_data(r, "initial", rc.mesh, 0.0);
    try {
        p.validate();
    } catch (const ContractError& e) {
        throw IngestError(e.what());
    }
    rc.admissibility = check_dt_admissible(p);
    if (!rc.admissibility.admissible) {
        std::ostringstream os;
        os << "time step violates the smallness condition C*dt < 1 with "
              "C = 2(1/(phi_min gamma_min) + L(gamma)/gamma_min): C*dt = "
           << rc.admissibility.c_dt;
        throw IngestError(os.str());
    }
    return rc;
}

inline RunConfig ingest_file(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw IngestError("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ingest(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------------------
// Execution.

enum ExitCode { exit_ok = 0, exit_usage = 1, exit_nonconvergence = 2 };

namespace detail {

using Json = nlohmann::ordered_json;

inline Json report_json(const SolveReport& rep)
{
    Json j;
    j["converged"] = rep.converged;
    j["stages"] = rep.stages.size();
    int newton = 0, picard = 0;
    for (const auto& s : rep.stages) {
        newton += s.newton_iters;
        picard += s.picard_sweeps;
    }
    j["newton_iters"] = newton;
    j["picard_sweeps"] = picard;
    j["final_eps"] = rep.stages.empty() ? 0.0 : rep.stages.back().eps;
    j["final_residual"] = rep.stages.empty() ? 0.0 : rep.stages.back().final_residual;
    j["stage_tol"] = rep.stage_tol;
    j["m_w3div"] = rep.norms.m_w3div;
    j["S_32"] = rep.norms.S_32;
    j["div_defect"] = rep.norms.div_defect;
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream os(p, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + p.string());
    os << s;
}

inline void write_json(const std::filesystem::path& p, const Json& j)
{
    write_text(p, j.dump(2) + "\n");
}

inline void write_fields(const std::filesystem::path& p, const MixedState& st, const std::string& title)
{
    write_vtk(p.string(), *st.second.mesh(), {{{"S", &st.second}}, {{"m", &st.first}}}, title);
}

inline std::string csv_number(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace detail

/// Runs the configured mode, writing artifacts to `out`. Returns an ExitCode.
inline int execute(const RunConfig& rc, const std::filesystem::path& out, std::ostream& log,
                   bool verbose = false)
{
    namespace fs = std::filesystem;
    using detail::Json;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        log << "error: cannot create output directory " << out.string() << ": " << ec.message() << '\n';
        return exit_usage;
    }
    fs::remove(out / "FAILED", ec);

    Json report;
    report["schema"] = 1;
    report["mode"] = mode_name(rc.mode);

    auto fail = [&](int code, const std::string& msg) {
        report["status"] = "failed";
        report["message"] = msg;
        detail::write_json(out / "report.json", report);
        detail::write_text(out / "FAILED", msg + "\n");
        log << "error: " << msg << '\n';
        return code;
    };

    try {
        switch (rc.mode) {
        case Mode::stationary: {
            try {
                const auto [st, rep] = solve_stationary(rc.system, rc.schedule, rc.tol);
                if (verbose)
                    log << "stationary: " << rep.stages.size() << " stages, " << rep.wall_time
                        << " s\n";
                report["solve"] = detail::report_json(rep);
                detail::write_fields(out / "fields.vtk", st, "dfmix stationary");
            } catch (const ContinuationError& e) {
                report["solve"] = detail::report_json(e.report());
                return fail(exit_nonconvergence, e.what());
            }
            break;
        }
        case Mode::transient: {
            TransientProblem const& p = rc.problem;
            std::optional<RunResult> run_result;
            try {
                run_result = run(p, rc.tol, rc.schedule);
            } catch (const StepError& e) {
                report["failed_step"] = e.step();
                return fail(exit_nonconvergence, e.what());
            }
            const RunResult& res = *run_result;
            std::ostringstream csv;
            write_monitor_csv(csv, res.monitor);
            detail::write_text(out / "monitor.csv", csv.str());
            const int K = p.time.steps;
            for (int k = 0; k <= K; ++k)
                if (k == K || (rc.vtk_every > 0 && k % rc.vtk_every == 0)) {
                    std::ostringstream name;
                    name << "fields_" << std::setw(4) << std::setfill('0') << k << ".vtk";
                    detail::write_fields(out / name.str(), res.trajectory.at_step(k),
                                         "dfmix transient step " + std::to_string(k));
                }
            int newton = 0;
            for (const auto& r : res.monitor.records)
                newton += r.newton_iters;
            if (verbose)
                log << "transient: " << K << " steps, " << newton << " Newton iterations\n";
            report["steps"] = K;
            report["dt"] = p.time.dt();
            report["c_dt"] = res.monitor.c_dt;
            report["newton_iters"] = newton;
            report["recursion_violations"] = res.monitor.recursion_violations();
            report["max_abs_mass_defect"] = res.monitor.max_abs_mass_defect();
            report["final_energy"] = res.monitor.records.back().energy;
            report["increment_sum"] = res.monitor.records.back().increment_sum;
            break;
        }
        case Mode::study: {
            StudyResult res;
            try {
                res = convergence_study(rc.study_case, rc.study_meshes, rc.schedule, rc.tol);
            } catch (const StudyError& e) {
                std::ostringstream csv;
                write_study_csv(csv, e.partial());
                detail::write_text(out / "study.csv", csv.str());
                return fail(exit_nonconvergence, e.what());
            }
            std::ostringstream csv, summary;
            write_study_csv(csv, res);
            write_study_summary(summary, res);
            detail::write_text(out / "study.csv", csv.str());
            detail::write_text(out / "summary.txt", summary.str());
            if (verbose)
                log << summary.str();
            report["case"] = rc.study_case_name;
            report["meshes"] = rc.study_meshes;
            report["order_S"] = res.order_S;
            report["order_m"] = res.order_m;
            break;
        }
        case Mode::sweep: {
            const auto s = inequality_sweep(rc.seed, rc.sweep_samples, rc.operator_pairs);
            std::ostringstream csv;
            csv << "schema = 1\ninequality,worst_relative_slack\n";
            const std::pair<const char*, double> rows[] = {
                {"vector_continuity", s.continuity}, {"vector_monotonicity", s.monotonicity},
                {"sqrt_holder", s.holder},           {"sqrt_monotonicity", s.sqrt_mono},
                {"operator_monotonicity", s.operator_mono}};
            for (const auto& [name, v] : rows)
                csv << name << ',' << detail::csv_number(v) << '\n';
            detail::write_text(out / "sweep.csv", csv.str());
            report["seed"] = rc.seed;
            report["samples"] = rc.sweep_samples;
            report["worst_slack"] = s.worst();
            report["witness_monotonicity"] = s.witness_monotonicity;
            report["witness_holder"] = s.witness_holder;
            if (s.worst() < -1e-12) {
                report["status"] = "violated";
                detail::write_json(out / "report.json", report);
                detail::write_text(out / "FAILED", "inequality slack below -1e-12\n");
                log << "error: inequality slack below -1e-12\n";
                return exit_nonconvergence;
            }
            break;
        }
        }
    } catch (const ContractError& e) {
        return fail(exit_usage, e.what());
    } catch (const NonconvergenceError& e) {
        return fail(exit_nonconvergence, e.what());
    } catch (const std::runtime_error& e) {
        return fail(exit_usage, e.what());
    }
    report["status"] = "ok";
    detail::write_json(out / "report.json", report);
    return exit_ok;
}

} // namespace dfmix::cli
