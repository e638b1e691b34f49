#include "ontolab/automaton.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ontolab {

DeterministicAutomaton::DeterministicAutomaton(int n, std::vector<int> map)
    : n_states(n), next(std::move(map)) {
    if (n <= 0) throw std::invalid_argument("automaton: need at least one state");
    if (static_cast<int>(next.size()) != n)
        throw std::invalid_argument("automaton: map size does not match state count");
    for (int t : next)
        if (t < 0 || t >= n)
            throw std::invalid_argument("automaton: target state out of range");
}

bool DeterministicAutomaton::injective() const {
    std::vector<char> seen(n_states, 0);
    for (int t : next) {
        if (seen[t]) return false;
        seen[t] = 1;
    }
    return true;
}

int DeterministicAutomaton::iterate(int s, int k) const {
    for (int i = 0; i < k; ++i) s = next[s];
    return s;
}

DeterministicAutomaton DeterministicAutomaton::parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int n = -1;
    std::vector<int> map;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        if (line.rfind("states:", 0) == 0) {
            n = std::stoi(line.substr(7));
            if (n <= 0) throw std::invalid_argument("automaton file: states must be positive");
            map.assign(n, -1);
            continue;
        }
        const auto arrow = line.find("->");
        if (arrow == std::string::npos || n < 0)
            throw std::invalid_argument("automaton file: line " + std::to_string(line_no) +
                                        ": expected 'states: n' or 's -> t'");
        const int s = std::stoi(line.substr(0, arrow));
        const int t = std::stoi(line.substr(arrow + 2));
        if (s < 1 || s > n || t < 1 || t > n)
            throw std::invalid_argument("automaton file: line " + std::to_string(line_no) +
                                        ": state label out of range (labels are 1-based)");
        if (map[s - 1] != -1)
            throw std::invalid_argument("automaton file: duplicate transition for state " +
                                        std::to_string(s));
        map[s - 1] = t - 1;
    }
    if (n < 0) throw std::invalid_argument("automaton file: missing 'states: n'");
    for (int s = 0; s < n; ++s)
        if (map[s] == -1)
            throw std::invalid_argument("automaton file: no transition for state " +
                                        std::to_string(s + 1));
    return DeterministicAutomaton(n, std::move(map));
}

std::string DeterministicAutomaton::to_text() const {
    std::ostringstream out;
    out << "states: " << n_states << "\n";
    for (int s = 0; s < n_states; ++s)
        out << (s + 1) << " -> " << (next[s] + 1) << "\n";
    return out.str();
}

bool EvolutionMatrix::is_unitary(double tol) const {
    const auto& u = entries;
    Eigen::MatrixXcd gram = u.adjoint() * u;
    gram -= Eigen::MatrixXcd::Identity(size(), size());
    return gram.cwiseAbs().maxCoeff() <= tol;
}

bool StatePartition::stable_under(const DeterministicAutomaton& a) const {
    for (const auto& cls : classes) {
        if (cls.empty()) return false;
        const int target = class_of[a.next[cls.front()]];
        for (int s : cls)
            if (class_of[a.next[s]] != target) return false;
    }
    return true;
}

EvolutionMatrix transition_matrix(const DeterministicAutomaton& a, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("transition_matrix: dt must be positive");
    EvolutionMatrix u;
    u.dt = dt;
    u.entries = Eigen::MatrixXcd::Zero(a.n_states, a.n_states);
    for (int j = 0; j < a.n_states; ++j) u.entries(a.next[j], j) = 1.0;
    return u;
}

StatePartition equivalence_classes(const DeterministicAutomaton& a) {
    const int n = a.n_states;
    // In a functional graph on n nodes any two merging orbits have merged
    // after at most n-1 steps, so the fibers of next^n are the classes.
    std::vector<int> image(n);
    for (int s = 0; s < n; ++s) image[s] = a.iterate(s, n);

    StatePartition p;
    p.class_of.assign(n, -1);
    std::map<int, int> class_of_image; // image state -> class index, by first member
    for (int s = 0; s < n; ++s) {
        auto it = class_of_image.find(image[s]);
        if (it == class_of_image.end()) {
            const int idx = static_cast<int>(p.classes.size());
            class_of_image.emplace(image[s], idx);
            p.classes.push_back({s});
            p.class_of[s] = idx;
        } else {
            p.classes[it->second].push_back(s);
            p.class_of[s] = it->second;
        }
    }
    return p;
}

DeterministicAutomaton quotient(const DeterministicAutomaton& a,
                                const StatePartition& p) {
    if (static_cast<int>(p.class_of.size()) != a.n_states)
        throw std::invalid_argument("quotient: partition does not cover the state set");
    if (!p.stable_under(a))
        throw std::invalid_argument(
            "quotient: partition is not stable under the next-state map");

    std::vector<int> next(p.n_classes());
    for (int c = 0; c < p.n_classes(); ++c)
        next[c] = p.class_of[a.next[p.classes[c].front()]];
    DeterministicAutomaton q(p.n_classes(), std::move(next));
    if (!q.injective())
        throw std::logic_error("quotient: expected a permutation on classes");
    return q;
}

DiscreteSpectrum spectrum(const EvolutionMatrix& u, int energy_sign) {
    if (!u.is_unitary(1e-12))
        throw std::domain_error(
            "spectrum: evolution matrix is not unitary; quotient the automaton by its "
            "equivalence classes first");
    if (energy_sign != 1 && energy_sign != -1)
        throw std::invalid_argument("spectrum: energy_sign must be +1 or -1");

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u.entries, false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("spectrum: eigensolver failed");

    DiscreteSpectrum out;
    out.dt = u.dt;
    out.energy_sign = energy_sign;
    out.eigenphases.reserve(u.size());
    for (int k = 0; k < u.size(); ++k) {
        const std::complex<double> lambda = es.eigenvalues()[k];
        double phi = std::arg(lambda); // principal branch (-pi, pi]
        // atan2 may return -pi for values on the negative real axis
        if (phi <= -std::numbers::pi) phi = std::numbers::pi;
        out.eigenphases.push_back(phi);
    }
    std::sort(out.eigenphases.begin(), out.eigenphases.end());
    out.hamiltonian_eigenvalues.reserve(u.size());
    for (double phi : out.eigenphases)
        out.hamiltonian_eigenvalues.push_back(energy_sign * phi / u.dt);
    return out;
}

BeableReport beable_check(const EvolutionMatrix& u,
                          const std::vector<Eigen::MatrixXcd>& ops, int t_max) {
    if (!u.is_unitary(1e-12))
        throw std::domain_error("beable_check: evolution matrix must be unitary");
    if (t_max < 0) throw std::invalid_argument("beable_check: t_max must be >= 0");
    const int n = u.size();
    for (const auto& op : ops) {
        if (op.rows() != n || op.cols() != n)
            throw std::invalid_argument("beable_check: operator dimension mismatch");
        if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument("beable_check: operators must be Hermitian");
    }

    // Heisenberg evolution O(t) = U^-t O U^t for t = 0..t_max
    std::vector<std::vector<Eigen::MatrixXcd>> evolved(ops.size());
    for (size_t i = 0; i < ops.size(); ++i) {
        evolved[i].reserve(t_max + 1);
        evolved[i].push_back(ops[i]);
        for (int t = 1; t <= t_max; ++t)
            evolved[i].push_back(u.entries.adjoint() * evolved[i].back() * u.entries);
    }

    BeableReport report;
    for (size_t i = 0; i < ops.size(); ++i) {
        for (size_t j = i; j < ops.size(); ++j) {
            for (int t = 0; t <= t_max; ++t) {
                for (int s = 0; s <= t_max; ++s) {
                    const Eigen::MatrixXcd comm =
                        evolved[i][t] * evolved[j][s] - evolved[j][s] * evolved[i][t];
                    report.max_violation =
                        std::max(report.max_violation, comm.cwiseAbs().maxCoeff());
                }
            }
        }
    }
    report.commuting = report.max_violation < 1e-10;
    return report;
}

} // namespace ontolab
