#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qflair/circuit.hpp"

namespace qflair {

inline constexpr int kMaxQubits = 12;

// Dense n-qubit state. Qubit 0 is the leftmost tensor factor, i.e. the most
// significant bit of the amplitude index.
struct StateVector {
    int num_qubits = 1;
    std::vector<std::complex<double>> amplitudes;

    static StateVector zero_state(int num_qubits);

    std::size_t dim() const { return amplitudes.size(); }

    // |norm^2 - 1|
    double norm_error() const;

    // Tensors one fresh qubit in |0> onto the right (index num_qubits).
    StateVector with_appended_qubit() const;
};

// A gate ready for simulation: concrete kind, qubits and bound angle.
// CzHRz is not a simulator primitive; it is expanded before this level.
struct BoundGate {
    GateKind kind = GateKind::H;
    int q0 = 0;
    int q1 = -1;
    double angle = 0.0;  // ignored for H, CZ

    static BoundGate h(int q) { return {GateKind::H, q, -1, 0.0}; }
    static BoundGate cz(int a, int b) { return {GateKind::CZ, a, b, 0.0}; }
    static BoundGate rotation(GateKind kind, double angle, int q0, int q1 = -1) {
        return {kind, q0, q1, angle};
    }
};

void apply_gate_inplace(StateVector& state, const BoundGate& gate);
StateVector apply_gate(StateVector state, const BoundGate& gate);

// |0..0> evolved through the circuit with every angle bound for x.
StateVector prepare_state(const FeatureMapCircuit& circuit, std::span<const double> x);

// Squared magnitude of the all-zero amplitude, i.e. <psi|(|0><0|)^n|psi>.
double allzero_probability(const StateVector& state);

// |<b|a>|^2
double state_fidelity(const StateVector& a, const StateVector& b);

// --- finite-shot estimation ---------------------------------------------

struct ShotConfig {
    std::uint32_t shots = 0;  // 0 means exact
    std::uint64_t seed = 0;

    bool exact() const { return shots == 0; }
    static ShotConfig exact_mode() { return {0, 0}; }
    static ShotConfig sampled(std::uint32_t shots, std::uint64_t seed) {
        return {shots, seed};
    }
};

// k/shots for a seeded binomial draw k ~ Bin(shots, p); p itself in exact
// mode. Pure: the result depends only on (p, shots, seed).
double estimate_with_shots(double p, const ShotConfig& cfg);

// Deterministic stream of shot estimates: call i uses a sub-seed derived
// from (seed, i). Exact mode passes probabilities through unchanged.
class ShotSampler {
public:
    ShotSampler() = default;  // exact
    ShotSampler(std::uint32_t shots, std::uint64_t seed) : shots_(shots), seed_(seed) {}

    bool exact() const { return shots_ == 0; }
    std::uint32_t shots() const { return shots_; }
    double estimate(double p);

private:
    std::uint32_t shots_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace qflair
