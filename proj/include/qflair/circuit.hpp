#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qflair {

// Gate vocabulary. Rotation kinds are generated by a Hermitian A with A^2 = I
// (conventions: R(a) = exp(-i a A / 2)). CzHRz is the composite entangling
// encoder (CZ on both qubits, then H and RZ on the second); its only free
// angle is the final RZ.
enum class GateKind { RX, RY, RZ, RXX, RYY, RZZ, H, CZ, CzHRz };

// Variational dependence of a placed gate: neither (Fixed), a trainable
// weight, a data feature, or weight times feature.
enum class GateRole { Fixed, WeightOnly, DataOnly, WeightData };

bool is_rotation(GateKind kind);   // RX..RZZ
bool is_two_qubit(GateKind kind);  // RXX, RYY, RZZ, CZ, CzHRz
bool kind_allows_role(GateKind kind, GateRole role);

std::string_view to_string(GateKind kind);
std::string_view to_string(GateRole role);
std::optional<GateKind> gate_kind_from_string(std::string_view s);
std::optional<GateRole> gate_role_from_string(std::string_view s);

// One gate in the ansatz. q1 is -1 for single-qubit kinds. CZ is symmetric
// and stored with q0 < q1; for CzHRz the H/RZ pair acts on q1.
struct PlacedGate {
    GateKind kind = GateKind::H;
    int q0 = 0;
    int q1 = -1;
    GateRole role = GateRole::Fixed;
    std::optional<double> theta;          // in [-1, 1] when present
    std::optional<int> feature_index;     // in [0, feature_dim) when present

    int arity() const { return q1 < 0 ? 1 : 2; }
    int max_qubit() const { return q1 < 0 ? q0 : (q0 > q1 ? q0 : q1); }

    static PlacedGate fixed(GateKind kind, int q0, int q1 = -1);
    static PlacedGate weight(GateKind kind, double theta, int q0, int q1 = -1);
    static PlacedGate data(GateKind kind, int feature_index, int q0, int q1 = -1);
    static PlacedGate weight_data(GateKind kind, double theta, int feature_index,
                                  int q0, int q1 = -1);
};

// The feature-map ansatz: an ordered gate list over num_qubits qubits,
// embedding feature_dim-dimensional data points. num_qubits is always
// 1 + the highest qubit index used (one idle qubit for the empty ansatz).
struct FeatureMapCircuit {
    int feature_dim = 0;
    int num_qubits = 1;
    std::vector<PlacedGate> gates;

    static FeatureMapCircuit empty(int feature_dim);

    // Validating append; grows num_qubits as needed.
    void append(const PlacedGate& gate);

    // Checks all invariants; throws ConfigError with the offending gate index.
    void validate() const;
};

// Resolves a gate's rotation angle for a data point per its role:
// Fixed -> none, WeightOnly -> theta, DataOnly -> x[k], WeightData -> theta*x[k].
std::optional<double> bind_angle(const PlacedGate& gate, std::span<const double> x);

// --- model metadata stored alongside the circuit ------------------------

struct QnnMeta {
    double threshold_b = 0.0;
};

struct QsvmMeta {
    double C = 1.0;
    double bias = 0.0;
    // Aligned arrays over the support vectors only.
    std::vector<double> duals;
    std::vector<std::uint32_t> support_indices;
    std::vector<std::vector<double>> support_points;
    std::vector<std::int8_t> support_labels;
};

using ModelMeta = std::variant<QnnMeta, QsvmMeta>;

struct ParsedModel {
    FeatureMapCircuit circuit;
    ModelMeta meta;
};

// JSON circuit file, schema version 1 (see README). Round-trips bit-exactly.
std::string serialize_circuit(const FeatureMapCircuit& circuit, const ModelMeta& meta);
ParsedModel parse_circuit(std::string_view text);

}  // namespace qflair
