#include "qflair/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "qflair/error.hpp"
#include "qflair/rng.hpp"

namespace qflair {

namespace {

using cd = std::complex<double>;

// qubit q occupies bit position n-1-q (qubit 0 is the leftmost tensor factor)
inline std::size_t bit_of(int num_qubits, int q) {
    return static_cast<std::size_t>(num_qubits - 1 - q);
}

void check_qubit(const StateVector& s, int q) {
    if (q < 0 || q >= s.num_qubits) {
        throw std::invalid_argument("qubit index " + std::to_string(q) + " out of range for " +
                                    std::to_string(s.num_qubits) + " qubits");
    }
}

void apply_single(StateVector& s, int q, cd u00, cd u01, cd u10, cd u11) {
    const std::size_t p = bit_of(s.num_qubits, q);
    const std::size_t stride = std::size_t{1} << p;
    const std::size_t dim = s.dim();
    auto* a = s.amplitudes.data();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const cd lo = a[i];
            const cd hi = a[i + stride];
            a[i] = u00 * lo + u01 * hi;
            a[i + stride] = u10 * lo + u11 * hi;
        }
    }
}

}  // namespace

StateVector StateVector::zero_state(int num_qubits) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
        throw std::invalid_argument("num_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
    StateVector s;
    s.num_qubits = num_qubits;
    s.amplitudes.assign(std::size_t{1} << num_qubits, cd{0.0, 0.0});
    s.amplitudes[0] = cd{1.0, 0.0};
    return s;
}

double StateVector::norm_error() const {
    double n2 = 0.0;
    for (const auto& a : amplitudes) n2 += std::norm(a);
    return std::abs(n2 - 1.0);
}

StateVector StateVector::with_appended_qubit() const {
    if (num_qubits >= kMaxQubits) {
        throw std::invalid_argument("qubit cap reached");
    }
    StateVector out;
    out.num_qubits = num_qubits + 1;
    out.amplitudes.assign(dim() * 2, cd{0.0, 0.0});
    // new qubit is the rightmost factor, in |0>
    for (std::size_t i = 0; i < dim(); ++i) out.amplitudes[2 * i] = amplitudes[i];
    return out;
}

void apply_gate_inplace(StateVector& s, const BoundGate& g) {
    check_qubit(s, g.q0);
    if (is_two_qubit(g.kind)) {
        check_qubit(s, g.q1);
        if (g.q0 == g.q1) throw std::invalid_argument("duplicate qubits on a two-qubit gate");
    } else if (g.q1 >= 0) {
        throw std::invalid_argument("single-qubit gate given two qubits");
    }

    const double half = 0.5 * g.angle;
    const double c = std::cos(half);
    const double sn = std::sin(half);

    switch (g.kind) {
        case GateKind::H: {
            const double r = 1.0 / std::sqrt(2.0);
            apply_single(s, g.q0, {r, 0}, {r, 0}, {r, 0}, {-r, 0});
            return;
        }
        case GateKind::RX:
            apply_single(s, g.q0, {c, 0}, {0, -sn}, {0, -sn}, {c, 0});
            return;
        case GateKind::RY:
            apply_single(s, g.q0, {c, 0}, {-sn, 0}, {sn, 0}, {c, 0});
            return;
        case GateKind::RZ:
            apply_single(s, g.q0, {c, -sn}, {0, 0}, {0, 0}, {c, sn});
            return;
        case GateKind::CZ: {
            const std::size_t mask =
                (std::size_t{1} << bit_of(s.num_qubits, g.q0)) |
                (std::size_t{1} << bit_of(s.num_qubits, g.q1));
            for (std::size_t i = 0; i < s.dim(); ++i) {
                if ((i & mask) == mask) s.amplitudes[i] = -s.amplitudes[i];
            }
            return;
        }
        case GateKind::RZZ: {
            const std::size_t b0 = std::size_t{1} << bit_of(s.num_qubits, g.q0);
            const std::size_t b1 = std::size_t{1} << bit_of(s.num_qubits, g.q1);
            const cd same{c, -sn};  // Z x Z eigenvalue +1
            const cd diff{c, sn};   // eigenvalue -1
            for (std::size_t i = 0; i < s.dim(); ++i) {
                const bool equal_bits = ((i & b0) != 0) == ((i & b1) != 0);
                s.amplitudes[i] *= equal_bits ? same : diff;
            }
            return;
        }
        case GateKind::RXX:
        case GateKind::RYY: {
            const std::size_t b0 = std::size_t{1} << bit_of(s.num_qubits, g.q0);
            const std::size_t b1 = std::size_t{1} << bit_of(s.num_qubits, g.q1);
            const std::size_t mask = b0 | b1;
            auto* a = s.amplitudes.data();
            for (std::size_t i = 0; i < s.dim(); ++i) {
                if (i & b0) continue;  // visit each {i, i^mask} pair once
                const std::size_t j = i ^ mask;
                const cd ai = a[i];
                const cd aj = a[j];
                if (g.kind == GateKind::RXX) {
                    a[i] = c * ai + cd{0, -sn} * aj;
                    a[j] = c * aj + cd{0, -sn} * ai;
                } else {
                    // <i|YxY|j> = -(-1)^(bits of j) = -(-1)^(bits of i)
                    const int ones = ((i & b1) != 0) ? 1 : 0;  // bit b0 of i is 0 here
                    const double sign = ones ? -1.0 : 1.0;
                    a[i] = c * ai + cd{0, sn * sign} * aj;
                    a[j] = c * aj + cd{0, sn * sign} * ai;
                }
            }
            return;
        }
        case GateKind::CzHRz:
            throw std::invalid_argument("composite gate must be expanded before simulation");
    }
}

StateVector apply_gate(StateVector state, const BoundGate& gate) {
    apply_gate_inplace(state, gate);
    return state;
}

StateVector prepare_state(const FeatureMapCircuit& circuit, std::span<const double> x) {
    if (static_cast<int>(x.size()) < circuit.feature_dim) {
        throw ConfigError("data point has dimension " + std::to_string(x.size()) +
                          ", circuit expects " + std::to_string(circuit.feature_dim));
    }
    StateVector s = StateVector::zero_state(circuit.num_qubits);
    for (const auto& g : circuit.gates) {
        const std::optional<double> angle = bind_angle(g, x);
        if (g.kind == GateKind::CzHRz) {
            apply_gate_inplace(s, BoundGate::cz(g.q0, g.q1));
            apply_gate_inplace(s, BoundGate::h(g.q1));
            apply_gate_inplace(s, BoundGate::rotation(GateKind::RZ, angle.value(), g.q1));
        } else if (is_rotation(g.kind)) {
            apply_gate_inplace(s, BoundGate::rotation(g.kind, angle.value(), g.q0, g.q1));
        } else {
            apply_gate_inplace(s, {g.kind, g.q0, g.q1, 0.0});
        }
    }
    return s;
}

double allzero_probability(const StateVector& state) {
    const double p = std::norm(state.amplitudes[0]);
    return p > 1.0 ? 1.0 : p;
}

double state_fidelity(const StateVector& a, const StateVector& b) {
    if (a.num_qubits != b.num_qubits || a.dim() != b.dim()) {
        throw std::invalid_argument("state dimension mismatch");
    }
    cd overlap{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) {
        overlap += std::conj(b.amplitudes[i]) * a.amplitudes[i];
    }
    const double f = std::norm(overlap);
    return f > 1.0 ? 1.0 : f;
}

double estimate_with_shots(double p, const ShotConfig& cfg) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("probability out of [0, 1]");
    }
    if (cfg.exact()) return p;
    Rng rng(cfg.seed);
    std::uint32_t hits = 0;
    for (std::uint32_t i = 0; i < cfg.shots; ++i) {
        if (rng.uniform() < p) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(cfg.shots);
}

double ShotSampler::estimate(double p) {
    if (exact()) {
        ++counter_;
        return p;
    }
    return estimate_with_shots(p, ShotConfig::sampled(shots_, derive_seed(seed_, "shot", counter_++)));
}

}  // namespace qflair
