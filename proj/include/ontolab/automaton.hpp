#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace ontolab {

/// Finite deterministic universe: a state set {0..n-1} and a total next-state
/// map. The map need not be injective; non-injective maps lose information
/// and make the one-step evolution non-unitary.
struct DeterministicAutomaton {
    int n_states = 0;
    std::vector<int> next; // next[s] in {0..n-1}

    DeterministicAutomaton() = default;
    DeterministicAutomaton(int n, std::vector<int> map);

    bool injective() const;
    /// s after k applications of the map.
    int iterate(int s, int k) const;

    /// Parse the plain-text format: a line "states: n" followed by lines
    /// "s -> t" with 1-based state labels.
    static DeterministicAutomaton parse(const std::string& text);
    std::string to_text() const;
};

/// One-step evolution operator: entries(i,j) = 1 iff next(j) = i.
/// Every column has exactly one 1; the matrix is unitary iff the rows do too.
struct EvolutionMatrix {
    Eigen::MatrixXcd entries;
    double dt = 1.0;

    int size() const { return static_cast<int>(entries.rows()); }
    bool is_unitary(double tol = 1e-12) const;
};

/// Partition of the state set into information-loss equivalence classes.
/// Classes are ordered by their smallest member and stored 0-based.
struct StatePartition {
    std::vector<std::vector<int>> classes;
    std::vector<int> class_of;

    int n_classes() const { return static_cast<int>(classes.size()); }
    bool stable_under(const DeterministicAutomaton& a) const;
};

/// Eigenphases of a unitary evolution operator on the principal branch
/// (-pi, pi], sorted ascending, with the induced Hamiltonian eigenvalues.
struct DiscreteSpectrum {
    std::vector<double> eigenphases;
    std::vector<double> hamiltonian_eigenvalues;
    double dt = 1.0;
    /// +1: E = phase/dt (default). -1: E = -phase/dt, the sign that matches
    /// reading U = exp(-i H dt); both conventions are exercised in the tests.
    int energy_sign = +1;
};

struct BeableReport {
    bool commuting = false;
    double max_violation = 0.0; // largest absolute commutator entry
};

EvolutionMatrix transition_matrix(const DeterministicAutomaton& a, double dt = 1.0);

/// Group states whose forward orbits merge within n_states steps. The
/// resulting partition is stable under the next-state map.
StatePartition equivalence_classes(const DeterministicAutomaton& a);

/// Collapse an automaton onto the classes of a stable partition. The result
/// acts on class indices and is always a permutation automaton. Throws if the
/// partition is not stable.
DeterministicAutomaton quotient(const DeterministicAutomaton& a,
                                const StatePartition& p);

/// Eigenphases of a unitary evolution matrix. Throws with a hint to quotient
/// first when the input is not unitary within 1e-12.
DiscreteSpectrum spectrum(const EvolutionMatrix& u, int energy_sign = +1);

/// Check that the Heisenberg-picture operator family O_i(t) = U^-t O_i U^t
/// commutes at all pairs of times t, t' in {0..t_max}.
BeableReport beable_check(const EvolutionMatrix& u,
                          const std::vector<Eigen::MatrixXcd>& ops, int t_max);

} // namespace ontolab
