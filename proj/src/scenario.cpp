#include "ontolab/scenario.hpp"

#include "ontolab/automaton.hpp"
#include "ontolab/fj.hpp"
#include "ontolab/hooft.hpp"
#include "ontolab/koopman.hpp"
#include "ontolab/ode.hpp"
#include "ontolab/path_integral.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ontolab {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
        return x;
    } catch (...) {
        throw ValidationError("scenario: key '" + key + "': not a number: '" + v + "'");
    }
}

long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
        return x;
    } catch (...) {
        throw ValidationError("scenario: key '" + key + "': not an integer: '" + v + "'");
    }
}

Eigen::VectorXd parse_vector(const std::string& v, const std::string& key) {
    const auto parts = split_on(v, ',');
    Eigen::VectorXd out(static_cast<int>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i)
        out[static_cast<int>(i)] = parse_real(parts[i], key);
    return out;
}

// monomial list: "coeff:e1,e2,...;coeff:e1,e2,..."
Polynomial parse_polynomial(const std::string& v, int nvars, const std::string& key) {
    Polynomial p(nvars);
    for (const auto& mono : split_on(v, ';')) {
        if (mono.empty()) continue;
        const auto colon = mono.find(':');
        double coeff = 0.0;
        std::vector<int> exps(nvars, 0);
        if (colon == std::string::npos) {
            coeff = parse_real(mono, key); // bare constant term
        } else {
            coeff = parse_real(trim(mono.substr(0, colon)), key);
            const auto parts = split_on(mono.substr(colon + 1), ',');
            if (static_cast<int>(parts.size()) != nvars)
                throw ValidationError("scenario: key '" + key + "': monomial needs " +
                                      std::to_string(nvars) + " exponents");
            for (int i = 0; i < nvars; ++i) {
                exps[i] = static_cast<int>(parse_int(parts[i], key));
                if (exps[i] < 0)
                    throw ValidationError("scenario: key '" + key +
                                          "': negative exponent");
            }
        }
        p = p + Polynomial::monomial(nvars, exps, coeff);
    }
    return p;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("cannot write " + path);
    out << content;
}

std::string json_dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// system construction shared by the flow-based kinds

struct SystemSpec {
    THooftSystem system;
    int dim = 0;
};

const std::set<std::string> kSystemKeys = {"flow", "dim",    "omega",
                                           "matrix", "components", "charge",
                                           "box_half_width"};

SystemSpec build_system(const std::map<std::string, std::string>& keys) {
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = keys.find(k);
        if (it == keys.end()) return std::nullopt;
        return it->second;
    };
    const auto flow_kind = get("flow");
    if (!flow_kind) throw ValidationError("scenario: missing key 'flow'");

    FlowField flow;
    if (*flow_kind == "zero") {
        const int dim = get("dim") ? static_cast<int>(parse_int(*get("dim"), "dim")) : 2;
        flow = zero_flow(dim);
    } else if (*flow_kind == "rotation") {
        const double omega = get("omega") ? parse_real(*get("omega"), "omega") : 1.0;
        flow = rotation_flow(omega);
    } else if (*flow_kind == "linear") {
        if (!get("matrix")) throw ValidationError("scenario: linear flow needs 'matrix'");
        const auto rows = split_on(*get("matrix"), ';');
        const int dim = static_cast<int>(rows.size());
        Eigen::MatrixXd a(dim, dim);
        for (int i = 0; i < dim; ++i) {
            const Eigen::VectorXd row = parse_vector(rows[i], "matrix");
            if (row.size() != dim)
                throw ValidationError("scenario: 'matrix' must be square");
            a.row(i) = row;
        }
        flow = linear_flow(a);
    } else if (*flow_kind == "polynomial") {
        if (!get("components"))
            throw ValidationError("scenario: polynomial flow needs 'components'");
        const auto comps = split_on(*get("components"), '|');
        const int dim = static_cast<int>(comps.size());
        std::vector<Polynomial> polys;
        for (const auto& c : comps) polys.push_back(parse_polynomial(c, dim, "components"));
        flow = polynomial_flow(std::move(polys));
    } else {
        throw ValidationError("scenario: unknown flow family '" + *flow_kind +
                              "' (zero|linear|rotation|polynomial)");
    }

    std::vector<ScalarField> charges;
    if (get("charge")) {
        int idx = 1;
        for (const auto& spec : split_on(*get("charge"), '|')) {
            charges.push_back(ScalarField::from_q_polynomial(
                parse_polynomial(spec, flow.dim, "charge"), "C" + std::to_string(idx++)));
        }
    }
    const double half =
        get("box_half_width") ? parse_real(*get("box_half_width"), "box_half_width") : 2.0;

    SystemSpec spec{THooftSystem(flow, std::move(charges), half), flow.dim};
    return spec;
}

std::string csv_vector_header(const std::string& prefix, int n) {
    std::string out;
    for (int i = 1; i <= n; ++i) out += "," + prefix + std::to_string(i);
    return out;
}

json elimination_log_json(const ReducedSystem& red) {
    json log = json::array();
    for (const auto& e : red.elimination_log) {
        log.push_back({{"step", to_string(e.kind)},
                       {"variable", e.variable},
                       {"detail", e.detail}});
    }
    return log;
}

} // namespace

std::string ontolab_version() {
#ifdef ONTOLAB_VERSION
    return ONTOLAB_VERSION;
#else
    return "dev";
#endif
}

std::string bundled_scenario_dir() {
    if (const char* env = std::getenv("ONTOLAB_SCENARIO_DIR")) return env;
#ifdef ONTOLAB_BUNDLED_SCENARIO_DIR
    return ONTOLAB_BUNDLED_SCENARIO_DIR;
#else
    return "scenarios";
#endif
}

Scenario Scenario::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("scenario: cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), fs::path(path).parent_path().string());
}

Scenario Scenario::parse(const std::string& text, const std::string& source_dir) {
    Scenario sc;
    sc.source_dir = source_dir;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ValidationError("scenario: line " + std::to_string(line_no) +
                                  ": expected 'key: value'");
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (sc.keys.count(key))
            throw ValidationError("scenario: duplicate key '" + key + "'");
        sc.keys[key] = value;
    }
    if (!sc.keys.count("name")) throw ValidationError("scenario: missing 'name'");
    if (!sc.keys.count("kind")) throw ValidationError("scenario: missing 'kind'");
    sc.name = sc.keys["name"];
    sc.kind = sc.keys["kind"];
    sc.description = sc.keys.count("description") ? sc.keys["description"] : "";
    sc.validate();
    return sc;
}

void Scenario::validate() const {
    static const std::set<std::string> kinds = {"discrete",   "flow",
                                                "split-spectrum", "reduce",
                                                "sample-paths",   "koopman"};
    if (!kinds.count(kind))
        throw ValidationError("scenario: unknown kind '" + kind + "'");
    if (name.empty() || name.find_first_of("/\\ \t") != std::string::npos)
        throw ValidationError("scenario: 'name' must be a single path-safe token");

    const std::set<std::string> common = {"name", "kind", "description", "seed",
                                          "threads"};
    std::set<std::string> allowed = common;
    auto add_system = [&] {
        allowed.insert(kSystemKeys.begin(), kSystemKeys.end());
    };

    if (kind == "discrete") {
        allowed.insert({"automaton_file", "map", "states", "dt", "beable_check",
                        "beable_t_max", "energy_sign"});
        if (!keys.count("automaton_file") && !(keys.count("map") && keys.count("states")))
            throw ValidationError(
                "scenario: discrete kind needs 'automaton_file' or 'states' + 'map'");
        if (keys.count("dt") && parse_real(keys.at("dt"), "dt") <= 0.0)
            throw ValidationError("scenario: 'dt' must be positive");
    } else if (kind == "flow") {
        add_system();
        allowed.insert({"q0", "p0", "t_final", "rel_tol", "abs_tol", "samples"});
        for (const char* k : {"q0", "p0", "t_final"})
            if (!keys.count(k))
                throw ValidationError(std::string("scenario: flow kind needs '") + k + "'");
    } else if (kind == "split-spectrum") {
        add_system();
        allowed.insert({"q0", "p0", "t_final", "a", "n_max", "delta", "rel_tol"});
        for (const char* k : {"q0", "p0", "t_final", "a"})
            if (!keys.count(k))
                throw ValidationError(std::string("scenario: split-spectrum needs '") + k +
                                      "'");
    } else if (kind == "reduce") {
        add_system();
        allowed.insert({"a", "reference", "first_target", "pairs", "kinetic",
                        "potential", "constraint", "constraint_label", "max_rounds"});
        const bool from_system = keys.count("flow") > 0;
        const bool raw = keys.count("pairs") > 0 || keys.count("kinetic") > 0;
        if (from_system == raw)
            throw ValidationError(
                "scenario: reduce kind needs either a system ('flow', 'a', 'reference') "
                "or a raw Lagrangian ('pairs' or 'kinetic', plus 'potential')");
        if (from_system && (!keys.count("a") || !keys.count("reference")))
            throw ValidationError("scenario: reduce from a system needs 'a' and 'reference'");
        if (raw && !keys.count("potential"))
            throw ValidationError("scenario: raw reduce needs 'potential'");
        if (keys.count("pairs") && keys.count("kinetic"))
            throw ValidationError("scenario: give either 'pairs' or 'kinetic', not both");
    } else if (kind == "sample-paths") {
        add_system();
        allowed.insert({"q_start", "q_end", "t_start", "t_end", "n_slices", "sigma",
                        "sigma_ladder", "n_samples", "determinant_slices"});
        for (const char* k : {"q_start", "q_end", "t_end", "n_samples", "n_slices"})
            if (!keys.count(k))
                throw ValidationError(std::string("scenario: sample-paths needs '") + k +
                                      "'");
        if (!keys.count("sigma") && !keys.count("sigma_ladder"))
            throw ValidationError("scenario: sample-paths needs 'sigma' or 'sigma_ladder'");
        if (keys.count("sigma") && parse_real(keys.at("sigma"), "sigma") <= 0.0)
            throw ValidationError("scenario: 'sigma' must be positive");
        if (keys.count("sigma_ladder"))
            for (const auto& s : split_on(keys.at("sigma_ladder"), ','))
                if (parse_real(s, "sigma_ladder") <= 0.0)
                    throw ValidationError("scenario: 'sigma_ladder' entries must be positive");
        if (parse_int(keys.at("n_samples"), "n_samples") < 1)
            throw ValidationError("scenario: 'n_samples' must be >= 1");
        if (parse_int(keys.at("n_slices"), "n_slices") < 2)
            throw ValidationError("scenario: 'n_slices' must be >= 2");
        if (keys.count("determinant_slices")) {
            const long ds = parse_int(keys.at("determinant_slices"), "determinant_slices");
            if (ds < 8 || ds % 2 != 0)
                throw ValidationError(
                    "scenario: 'determinant_slices' must be even and >= 8");
        }
    } else if (kind == "koopman") {
        add_system();
        allowed.insert({"box", "resolution", "center", "width", "t", "n_steps",
                        "boundary", "n_max", "orbit_q0", "density_file"});
        if (!keys.count("t"))
            throw ValidationError("scenario: koopman needs 't'");
        if (!keys.count("density_file")) {
            for (const char* k : {"box", "resolution", "center", "width"})
                if (!keys.count(k))
                    throw ValidationError(std::string("scenario: koopman needs '") + k +
                                          "' (or 'density_file')");
            if (parse_real(keys.at("width"), "width") <= 0.0)
                throw ValidationError("scenario: 'width' must be positive");
            for (const auto& r : split_on(keys.at("resolution"), ','))
                if (parse_int(r, "resolution") < 8)
                    throw ValidationError("scenario: 'resolution' must be >= 8");
        }
        if (keys.count("boundary")) {
            const auto& b = keys.at("boundary");
            if (b != "error" && b != "zero" && b != "periodic")
                throw ValidationError("scenario: 'boundary' must be error|zero|periodic");
        }
    }

    for (const auto& [k, v] : keys)
        if (!allowed.count(k))
            throw ValidationError("scenario: unknown key '" + k + "' for kind '" + kind +
                                  "'");
    if (keys.count("seed")) parse_int(keys.at("seed"), "seed");
    if (keys.count("threads") && parse_int(keys.at("threads"), "threads") < 1)
        throw ValidationError("scenario: 'threads' must be >= 1");
}

namespace {

struct RunContext {
    const Scenario& sc;
    fs::path dir;
    std::uint64_t seed;
    double tol;
    int threads;
    std::vector<std::string> artifacts;

    std::string get(const std::string& k, const std::string& fallback = "") const {
        auto it = sc.keys.find(k);
        return it == sc.keys.end() ? fallback : it->second;
    }
    bool has(const std::string& k) const { return sc.keys.count(k) > 0; }

    void write(const std::string& file, const std::string& content) {
        const fs::path p = dir / file;
        write_file(p.string(), content);
        artifacts.push_back(p.string());
    }
};

json run_discrete(RunContext& ctx) {
    DeterministicAutomaton automaton;
    if (ctx.has("automaton_file")) {
        const fs::path p = fs::path(ctx.sc.source_dir) / ctx.get("automaton_file");
        std::ifstream in(p);
        if (!in) throw ValidationError("scenario: cannot read automaton file " + p.string());
        std::stringstream buf;
        buf << in.rdbuf();
        automaton = DeterministicAutomaton::parse(buf.str());
    } else {
        const int n = static_cast<int>(parse_int(ctx.get("states"), "states"));
        std::string text = "states: " + std::to_string(n) + "\n";
        for (const auto& arrow : split_on(ctx.get("map"), ','))
            text += arrow + "\n";
        automaton = DeterministicAutomaton::parse(text);
    }
    const double dt = ctx.has("dt") ? parse_real(ctx.get("dt"), "dt") : 1.0;
    const int energy_sign =
        ctx.has("energy_sign") ? static_cast<int>(parse_int(ctx.get("energy_sign"), "energy_sign")) : 1;

    const auto u = transition_matrix(automaton, dt);
    const auto partition = equivalence_classes(automaton);
    const auto q = quotient(automaton, partition);
    const auto uq = transition_matrix(q, dt);
    const auto spec = spectrum(uq, energy_sign);

    // partition report (1-based labels, matching the display convention)
    json classes = json::array();
    for (const auto& cls : partition.classes) {
        json c = json::array();
        for (int s : cls) c.push_back(s + 1);
        classes.push_back(c);
    }

    std::string csv = "index,eigenphase,energy\n";
    for (size_t k = 0; k < spec.eigenphases.size(); ++k)
        csv += std::to_string(k + 1) + "," + fmt(spec.eigenphases[k]) + "," +
               fmt(spec.hamiltonian_eigenvalues[k]) + "\n";
    ctx.write("spectrum.csv", csv);

    json summary = {
        {"n_states", automaton.n_states},
        {"injective", automaton.injective()},
        {"one_step_unitary", u.is_unitary()},
        {"classes", classes},
        {"quotient_states", q.n_states},
        {"quotient_map", q.next},
        {"quotient_unitary", uq.is_unitary()},
        {"dt", dt},
        {"energy_sign", energy_sign},
        {"eigenphases", spec.eigenphases},
        {"energies", spec.hamiltonian_eigenvalues},
    };

    if (ctx.get("beable_check") == "projectors") {
        const int t_max = ctx.has("beable_t_max")
                              ? static_cast<int>(parse_int(ctx.get("beable_t_max"), "beable_t_max"))
                              : q.n_states;
        std::vector<Eigen::MatrixXcd> ops;
        for (int k = 0; k < q.n_states; ++k) {
            Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(q.n_states, q.n_states);
            proj(k, k) = 1.0;
            ops.push_back(proj);
        }
        const auto rep = beable_check(uq, ops, t_max);
        summary["beables_commute"] = rep.commuting;
        summary["beable_violation"] = rep.max_violation;
    }
    ctx.write("partition.json", json_dump({{"classes", classes}}));
    return summary;
}

json run_flow(RunContext& ctx) {
    const auto spec = build_system(ctx.sc.keys);
    const Eigen::VectorXd q0 = parse_vector(ctx.get("q0"), "q0");
    const Eigen::VectorXd p0 = parse_vector(ctx.get("p0"), "p0");
    if (q0.size() != spec.dim || p0.size() != spec.dim)
        throw ValidationError("scenario: q0/p0 dimension mismatch with the flow");
    const double t_final = parse_real(ctx.get("t_final"), "t_final");
    if (t_final <= 0) throw ValidationError("scenario: 't_final' must be positive");

    IntegrateOptions opts;
    opts.rel_tol = ctx.has("rel_tol") ? parse_real(ctx.get("rel_tol"), "rel_tol") : ctx.tol;
    if (ctx.has("abs_tol")) opts.abs_tol = parse_real(ctx.get("abs_tol"), "abs_tol");
    const int samples =
        ctx.has("samples") ? static_cast<int>(parse_int(ctx.get("samples"), "samples")) : 200;
    for (int k = 1; k <= samples; ++k)
        opts.checkpoints.push_back(t_final * k / samples);

    const auto traj = integrate(spec.system, q0, p0, t_final, opts);

    std::string csv = "t" + csv_vector_header("q", spec.dim) +
                      csv_vector_header("p", spec.dim) + "\n";
    auto emit_row = [&](int idx) {
        csv += fmt(traj.times[idx]);
        for (int i = 0; i < spec.dim; ++i) csv += "," + fmt(traj.q[idx][i]);
        for (int i = 0; i < spec.dim; ++i) csv += "," + fmt(traj.p[idx][i]);
        csv += "\n";
    };
    emit_row(0);
    for (int idx : traj.checkpoint_index) emit_row(idx);
    ctx.write("trajectory.csv", csv);

    const auto h = spec.system.hamiltonian();
    double h_drift = 0.0;
    const double h0 = h(traj.q.front(), traj.p.front());
    for (size_t k = 0; k < traj.times.size(); ++k)
        h_drift = std::max(h_drift, std::abs(h(traj.q[k], traj.p[k]) - h0));

    json mono = json::array();
    for (int i = 0; i < spec.dim; ++i) {
        json row = json::array();
        for (int j = 0; j < spec.dim; ++j) row.push_back(traj.monodromy(i, j));
        mono.push_back(row);
    }
    json summary = {
        {"dim", spec.dim},
        {"t_final", t_final},
        {"steps", traj.meta.n_steps},
        {"rejected_steps", traj.meta.n_rejected},
        {"energy_drift", h_drift},
        {"monodromy", mono},
        {"monodromy_det", traj.monodromy.determinant()},
    };
    if (!spec.system.charges.empty()) {
        const auto check = spec.system.verify_charges();
        summary["charges_conserved"] = check.ok;
        summary["max_charge_bracket"] = check.max_bracket;
    }
    return summary;
}

json run_split_spectrum(RunContext& ctx) {
    const auto spec = build_system(ctx.sc.keys);
    if (spec.system.charges.empty())
        throw ValidationError("scenario: split-spectrum needs at least one 'charge'");
    const Eigen::VectorXd a = parse_vector(ctx.get("a"), "a");
    const Eigen::VectorXd q0 = parse_vector(ctx.get("q0"), "q0");
    const Eigen::VectorXd p0 = parse_vector(ctx.get("p0"), "p0");
    const double t_final = parse_real(ctx.get("t_final"), "t_final");
    const int n_max =
        ctx.has("n_max") ? static_cast<int>(parse_int(ctx.get("n_max"), "n_max")) : 10;

    const auto charge_check = spec.system.verify_charges();
    if (!charge_check.ok)
        throw NumericalError("scenario: registered charges do not commute with H (max "
                             "bracket " + fmt(charge_check.max_bracket) + ")");

    const auto sp = split(spec.system, a);
    const auto traj = integrate(spec.system, q0, p0, t_final);
    OrbitOptions oopts;
    if (ctx.has("delta")) oopts.delta = parse_real(ctx.get("delta"), "delta");
    const auto orbit = orbit_spectrum(spec.system, traj, sp, n_max, oopts);

    std::string csv = "n,E_n\n";
    for (size_t n = 0; n < orbit.levels.size(); ++n)
        csv += std::to_string(n) + "," + fmt(orbit.levels[n]) + "\n";
    ctx.write("levels.csv", csv);

    return json{
        {"period", orbit.period},
        {"rho", orbit.rho_value},
        {"levels", orbit.levels},
        {"quantization_consistent", orbit.quantization_consistent},
        {"quantization_residual", orbit.quantization_residual},
        {"max_charge_bracket", charge_check.max_bracket},
        {"split_verified", true},
    };
}

json run_reduce(RunContext& ctx) {
    FjOptions fj_opts;
    if (ctx.has("max_rounds"))
        fj_opts.max_rounds = static_cast<int>(parse_int(ctx.get("max_rounds"), "max_rounds"));

    std::optional<FirstOrderLagrangian> lagr;
    if (ctx.has("pairs") || ctx.has("kinetic")) {
        if (ctx.has("pairs")) {
            const int pairs = static_cast<int>(parse_int(ctx.get("pairs"), "pairs"));
            Polynomial v = parse_polynomial(ctx.get("potential"), 2 * pairs, "potential");
            lagr = FirstOrderLagrangian::canonical(pairs, Rational(v));
        } else {
            // dense constant kinetic entries, one row per ';'
            const auto rows = split_on(ctx.get("kinetic"), ';');
            const int m = static_cast<int>(rows.size());
            Eigen::MatrixXd k(m, m);
            for (int i = 0; i < m; ++i) {
                const Eigen::VectorXd row = parse_vector(rows[i], "kinetic");
                if (row.size() != m)
                    throw ValidationError("scenario: 'kinetic' must be square");
                k.row(i) = row;
            }
            std::vector<std::string> names;
            for (int i = 1; i <= m; ++i) names.push_back("x" + std::to_string(i));
            Polynomial v = parse_polynomial(ctx.get("potential"), m, "potential");
            lagr = FirstOrderLagrangian(std::move(names), k, Rational(v));
        }
        if (ctx.has("constraint")) {
            Polynomial c =
                parse_polynomial(ctx.get("constraint"), lagr->dim(), "constraint");
            lagr->add_multiplier(Rational(c), ctx.get("constraint_label", "eta"));
        }
    } else {
        const auto spec = build_system(ctx.sc.keys);
        if (spec.system.charges.empty())
            throw ValidationError("scenario: reduce from a system needs 'charge'");
        const Eigen::VectorXd a = parse_vector(ctx.get("a"), "a");
        const auto sp = split(spec.system, a);
        if (!sp.information_loss_root)
            throw ValidationError(
                "scenario: this system has no polynomial information-loss root");
        const auto h = spec.system.hamiltonian();
        lagr = FirstOrderLagrangian::canonical(spec.dim, *h.symbolic);
        lagr->add_multiplier(Rational(*sp.information_loss_root), "eta");
    }
    if (ctx.has("reference")) {
        const Eigen::VectorXd ref = parse_vector(ctx.get("reference"), "reference");
        if (ref.size() != lagr->dim())
            throw ValidationError("scenario: 'reference' needs " +
                                  std::to_string(lagr->dim()) + " entries (p,q[,eta])");
        lagr->set_reference_point(ref);
    }
    if (ctx.has("first_target")) {
        const auto& names = lagr->names();
        const auto it = std::find(names.begin(), names.end(), ctx.get("first_target"));
        if (it == names.end())
            throw ValidationError("scenario: 'first_target' is not a variable name");
        fj_opts.first_target = static_cast<int>(it - names.begin());
    }

    const auto red = fj_reduce(*lagr, fj_opts);

    json constraints = json::array();
    for (const auto& e : red.elimination_log)
        if (e.kind == EliminationStep::Kind::MultiplierConstraint)
            constraints.push_back(e.detail);
    const json reduction = {
        {"canonical_dim", red.canonical_dim},
        {"pairs", red.canonical_dim / 2},
        {"stuck", red.stuck},
        {"surviving_variables", red.system.names()},
        {"reduced_hamiltonian", red.reduced_hamiltonian().to_string(red.system.names())},
        {"constraints", constraints},
        {"elimination_log", elimination_log_json(red)},
    };
    ctx.write("reduction.json", json_dump(reduction));
    if (red.stuck)
        throw NumericalError("scenario: reduction stuck outside the supported class "
                             "(see reduction.json)");
    return reduction;
}

json run_sample_paths(RunContext& ctx) {
    const auto spec = build_system(ctx.sc.keys);
    PathSamplingConfig cfg;
    cfg.t_start = ctx.has("t_start") ? parse_real(ctx.get("t_start"), "t_start") : 0.0;
    cfg.t_end = parse_real(ctx.get("t_end"), "t_end");
    cfg.n_slices = static_cast<int>(parse_int(ctx.get("n_slices"), "n_slices"));
    cfg.n_samples = static_cast<int>(parse_int(ctx.get("n_samples"), "n_samples"));
    cfg.seed = ctx.seed;
    cfg.n_threads = ctx.threads;
    const Eigen::VectorXd q_start = parse_vector(ctx.get("q_start"), "q_start");
    const Eigen::VectorXd q_end = parse_vector(ctx.get("q_end"), "q_end");

    json summary = {{"seed", cfg.seed}, {"n_slices", cfg.n_slices},
                    {"n_samples", cfg.n_samples}};

    std::vector<double> ladder;
    if (ctx.has("sigma_ladder"))
        for (const auto& s : split_on(ctx.get("sigma_ladder"), ','))
            ladder.push_back(parse_real(s, "sigma_ladder"));

    const double sigma_single =
        ctx.has("sigma") ? parse_real(ctx.get("sigma"), "sigma")
                         : ladder.front();
    cfg.sigma = sigma_single;

    const auto ens = sample_paths(spec.system, q_start, q_end, cfg);
    const auto rep = moments(ens);

    std::string csv = "t" + csv_vector_header("q_mean", spec.dim) +
                      csv_vector_header("q_classical", spec.dim) + ",deviation\n";
    for (size_t j = 0; j < rep.times.size(); ++j) {
        csv += fmt(rep.times[j]);
        for (int i = 0; i < spec.dim; ++i) csv += "," + fmt(rep.mean[j][i]);
        for (int i = 0; i < spec.dim; ++i) csv += "," + fmt(rep.classical[j][i]);
        csv += "," + fmt(std::sqrt(rep.sq_deviation[j])) + "\n";
    }
    ctx.write("moments.csv", csv);

    summary["sigma"] = sigma_single;
    summary["effective_sample_size"] = ens.effective_sample_size;
    summary["mean_sq_deviation"] = rep.mean_sq_deviation;
    summary["max_mean_deviation"] = rep.max_mean_deviation;

    if (!ladder.empty()) {
        const auto scan = concentration_scan(spec.system, q_start, q_end, cfg, ladder);
        std::string lcsv = "sigma,mean_sq_deviation\n";
        for (size_t i = 0; i < scan.sigmas.size(); ++i)
            lcsv += fmt(scan.sigmas[i]) + "," + fmt(scan.mean_sq_deviation[i]) + "\n";
        ctx.write("ladder.csv", lcsv);
        summary["sigma_ladder"] = scan.sigmas;
        summary["ladder_msd"] = scan.mean_sq_deviation;
        summary["concentration_exponent"] = scan.fitted_exponent;
    }

    if (ctx.has("determinant_slices")) {
        const int ds = static_cast<int>(parse_int(ctx.get("determinant_slices"),
                                                  "determinant_slices"));
        const auto traj = integrate(spec.system, q_start,
                                    Eigen::VectorXd::Zero(spec.dim), cfg.t_end - cfg.t_start);
        const auto det = fluctuation_determinant(spec.system, traj, ds);
        const auto ghost = ghost_cancellation_check(spec.system, traj, ds);
        summary["log_det_delta_route"] = det.log_delta_route;
        summary["log_det_monodromy_route"] = det.log_monodromy_route;
        summary["det_route_disagreement"] =
            std::abs(det.log_delta_route - det.log_monodromy_route);
        summary["ghost_residual"] = ghost.residual;
    }
    return summary;
}

json run_koopman(RunContext& ctx) {
    const auto spec = build_system(ctx.sc.keys);
    const double t = parse_real(ctx.get("t"), "t");

    GridDensity rho;
    if (ctx.has("density_file")) {
        const fs::path p = fs::path(ctx.sc.source_dir) / ctx.get("density_file");
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ValidationError("scenario: cannot read density file " + p.string());
        std::stringstream buf;
        buf << in.rdbuf();
        rho = GridDensity::from_csv(buf.str());
        if (rho.dim() != spec.dim)
            throw ValidationError("scenario: imported density dimension mismatch");
    } else {
        const Eigen::VectorXd box = parse_vector(ctx.get("box"), "box");
        if (box.size() != 2) throw ValidationError("scenario: 'box' must be 'lo,hi'");
        std::vector<int> res;
        for (const auto& r : split_on(ctx.get("resolution"), ','))
            res.push_back(static_cast<int>(parse_int(r, "resolution")));
        if (static_cast<int>(res.size()) == 1) res.assign(spec.dim, res.front());
        if (static_cast<int>(res.size()) != spec.dim)
            throw ValidationError("scenario: 'resolution' entries must match the dimension");
        const Eigen::VectorXd center = parse_vector(ctx.get("center"), "center");
        const double width = parse_real(ctx.get("width"), "width");
        const Eigen::VectorXd lo = Eigen::VectorXd::Constant(spec.dim, box[0]);
        const Eigen::VectorXd hi = Eigen::VectorXd::Constant(spec.dim, box[1]);
        rho = GridDensity::gaussian(lo, hi, res, center, width);
    }
    const std::vector<int>& res = rho.resolution;

    PropagateOptions opts;
    opts.n_steps =
        ctx.has("n_steps") ? static_cast<int>(parse_int(ctx.get("n_steps"), "n_steps")) : 1;
    opts.n_threads = ctx.threads;
    const std::string b = ctx.get("boundary", "error");
    opts.boundary = b == "zero"       ? BoundaryPolicy::ZeroOutside
                    : b == "periodic" ? BoundaryPolicy::Periodic
                                      : BoundaryPolicy::Error;

    const auto out = propagate(rho, spec.system, t, opts);

    ctx.write("density.csv", out.density.to_csv());

    // plot-ready mid-row slice
    if (spec.dim == 2) {
        std::string slice = "q1,value\n";
        const int mid = res[1] / 2;
        for (int i = 0; i < res[0]; ++i) {
            const std::size_t flat =
                static_cast<std::size_t>(i) * res[1] + static_cast<std::size_t>(mid);
            slice += fmt(out.density.node(flat)[0]) + "," + fmt(out.density.values[flat]) +
                     "\n";
        }
        ctx.write("slice.csv", slice);
    }

    json summary = {
        {"t", t},
        {"n_steps", opts.n_steps},
        {"mass_drift", out.mass_drift},
        {"exit_fraction", out.exit_fraction},
        {"l1_return_distance", out.density.l1_distance(rho) / rho.l1_norm()},
        {"l2_change", std::abs(out.density.l2_norm() - rho.l2_norm()) / rho.l2_norm()},
    };

    if (ctx.has("orbit_q0")) {
        const Eigen::VectorXd q0 = parse_vector(ctx.get("orbit_q0"), "orbit_q0");
        const int n_max =
            ctx.has("n_max") ? static_cast<int>(parse_int(ctx.get("n_max"), "n_max")) : 8;
        const auto phases = koopman_orbit_phases(spec.system, q0, n_max);
        std::string pcsv = "n,phase\n";
        for (size_t k = 0; k < phases.size(); ++k)
            pcsv += std::to_string(k) + "," + fmt(phases[k]) + "\n";
        ctx.write("phases.csv", pcsv);
        summary["phases"] = phases;
    }
    return summary;
}

} // namespace

ScenarioResult Scenario::run(const RunOptions& opts) const {
    const auto t_begin = std::chrono::steady_clock::now();

    RunContext ctx{*this,
                   fs::path(opts.out_dir) / name,
                   opts.seed_override
                       ? *opts.seed_override
                       : (keys.count("seed")
                              ? static_cast<std::uint64_t>(parse_int(keys.at("seed"), "seed"))
                              : 20260808ULL),
                   opts.tol_override ? *opts.tol_override : 1e-10,
                   opts.threads,
                   {}};
    if (keys.count("threads"))
        ctx.threads = static_cast<int>(parse_int(keys.at("threads"), "threads"));
    fs::create_directories(ctx.dir);

    json summary;
    if (kind == "discrete") summary = run_discrete(ctx);
    else if (kind == "flow") summary = run_flow(ctx);
    else if (kind == "split-spectrum") summary = run_split_spectrum(ctx);
    else if (kind == "reduce") summary = run_reduce(ctx);
    else if (kind == "sample-paths") summary = run_sample_paths(ctx);
    else if (kind == "koopman") summary = run_koopman(ctx);
    else throw ValidationError("scenario: unknown kind '" + kind + "'");

    summary["scenario"] = name;
    summary["kind"] = kind;
    ctx.write("summary.json", json_dump(summary));

    const auto t_end = std::chrono::steady_clock::now();
    const auto wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_begin).count();

    // the manifest is the only artifact carrying timestamps
    std::ostringstream manifest;
    manifest << "scenario: " << name << "\n";
    manifest << "kind: " << kind << "\n";
    manifest << "version: " << ontolab_version() << "\n";
    manifest << "seed: " << ctx.seed << "\n";
    manifest << "threads: " << ctx.threads << "\n";
    const auto now = std::chrono::system_clock::now();
    const std::time_t now_t = std::chrono::system_clock::to_time_t(now);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now_t));
    manifest << "timestamp: " << stamp << "\n";
    manifest << "wall_ms: " << wall_ms << "\n";
    manifest << "config:\n";
    for (const auto& [k, v] : keys) manifest << "  " << k << ": " << v << "\n";
    manifest << "outputs:\n";
    for (const auto& a : ctx.artifacts) manifest << "  " << fs::path(a).filename().string() << "\n";
    {
        const fs::path p = ctx.dir / "run_manifest.txt";
        write_file(p.string(), manifest.str());
        ctx.artifacts.push_back(p.string());
    }

    return {name, summary, ctx.artifacts};
}

std::vector<ScenarioInfo> list_scenarios(const std::string& extra_dir) {
    std::vector<ScenarioInfo> out;
    auto scan = [&](const std::string& dir) {
        if (dir.empty() || !fs::is_directory(dir)) return;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() != ".scn") continue;
            try {
                const auto sc = Scenario::parse_file(entry.path().string());
                out.push_back({sc.name, sc.kind, sc.description, entry.path().string()});
            } catch (const std::exception&) {
                out.push_back({entry.path().stem().string(), "invalid",
                               "failed to parse", entry.path().string()});
            }
        }
    };
    scan(bundled_scenario_dir());
    if (!extra_dir.empty()) scan(extra_dir);
    std::sort(out.begin(), out.end(),
              [](const ScenarioInfo& a, const ScenarioInfo& b) { return a.name < b.name; });
    return out;
}

} // namespace ontolab
