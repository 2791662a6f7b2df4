#include "qflair/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "qflair/error.hpp"

namespace qflair {

using nlohmann::json;

bool is_rotation(GateKind kind) {
    switch (kind) {
        case GateKind::RX:
        case GateKind::RY:
        case GateKind::RZ:
        case GateKind::RXX:
        case GateKind::RYY:
        case GateKind::RZZ:
            return true;
        default:
            return false;
    }
}

bool is_two_qubit(GateKind kind) {
    switch (kind) {
        case GateKind::RXX:
        case GateKind::RYY:
        case GateKind::RZZ:
        case GateKind::CZ:
        case GateKind::CzHRz:
            return true;
        default:
            return false;
    }
}

bool kind_allows_role(GateKind kind, GateRole role) {
    if (kind == GateKind::H || kind == GateKind::CZ) return role == GateRole::Fixed;
    // Rotations and the composite carry a variational angle.
    return role != GateRole::Fixed;
}

std::string_view to_string(GateKind kind) {
    switch (kind) {
        case GateKind::RX: return "rx";
        case GateKind::RY: return "ry";
        case GateKind::RZ: return "rz";
        case GateKind::RXX: return "rxx";
        case GateKind::RYY: return "ryy";
        case GateKind::RZZ: return "rzz";
        case GateKind::H: return "h";
        case GateKind::CZ: return "cz";
        case GateKind::CzHRz: return "cz_h_rz";
    }
    return "?";
}

std::string_view to_string(GateRole role) {
    switch (role) {
        case GateRole::Fixed: return "fixed";
        case GateRole::WeightOnly: return "weight";
        case GateRole::DataOnly: return "data";
        case GateRole::WeightData: return "weight_data";
    }
    return "?";
}

std::optional<GateKind> gate_kind_from_string(std::string_view s) {
    if (s == "rx") return GateKind::RX;
    if (s == "ry") return GateKind::RY;
    if (s == "rz") return GateKind::RZ;
    if (s == "rxx") return GateKind::RXX;
    if (s == "ryy") return GateKind::RYY;
    if (s == "rzz") return GateKind::RZZ;
    if (s == "h") return GateKind::H;
    if (s == "cz") return GateKind::CZ;
    if (s == "cz_h_rz") return GateKind::CzHRz;
    return std::nullopt;
}

std::optional<GateRole> gate_role_from_string(std::string_view s) {
    if (s == "fixed") return GateRole::Fixed;
    if (s == "weight") return GateRole::WeightOnly;
    if (s == "data") return GateRole::DataOnly;
    if (s == "weight_data") return GateRole::WeightData;
    return std::nullopt;
}

PlacedGate PlacedGate::fixed(GateKind kind, int q0, int q1) {
    PlacedGate g;
    g.kind = kind;
    g.q0 = q0;
    g.q1 = q1;
    g.role = GateRole::Fixed;
    if (kind == GateKind::CZ && q1 >= 0 && q1 < q0) std::swap(g.q0, g.q1);
    return g;
}

PlacedGate PlacedGate::weight(GateKind kind, double theta, int q0, int q1) {
    PlacedGate g;
    g.kind = kind;
    g.q0 = q0;
    g.q1 = q1;
    g.role = GateRole::WeightOnly;
    g.theta = theta;
    return g;
}

PlacedGate PlacedGate::data(GateKind kind, int feature_index, int q0, int q1) {
    PlacedGate g;
    g.kind = kind;
    g.q0 = q0;
    g.q1 = q1;
    g.role = GateRole::DataOnly;
    g.feature_index = feature_index;
    return g;
}

PlacedGate PlacedGate::weight_data(GateKind kind, double theta, int feature_index,
                                   int q0, int q1) {
    PlacedGate g;
    g.kind = kind;
    g.q0 = q0;
    g.q1 = q1;
    g.role = GateRole::WeightData;
    g.theta = theta;
    g.feature_index = feature_index;
    return g;
}

FeatureMapCircuit FeatureMapCircuit::empty(int feature_dim) {
    if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
    FeatureMapCircuit c;
    c.feature_dim = feature_dim;
    c.num_qubits = 1;
    return c;
}

namespace {

void check_gate(const PlacedGate& g, int feature_dim, std::size_t index) {
    const std::string at = " (gate " + std::to_string(index) + ")";
    if (g.q0 < 0) throw ConfigError("negative qubit index" + at);
    if (is_two_qubit(g.kind)) {
        if (g.q1 < 0) throw ConfigError(std::string(to_string(g.kind)) + " needs two qubits" + at);
        if (g.q0 == g.q1) throw ConfigError("duplicate qubits on a two-qubit gate" + at);
    } else if (g.q1 >= 0) {
        throw ConfigError(std::string(to_string(g.kind)) + " takes one qubit" + at);
    }
    if (!kind_allows_role(g.kind, g.role)) {
        throw ConfigError("role " + std::string(to_string(g.role)) + " not valid for " +
                          std::string(to_string(g.kind)) + at);
    }
    const bool wants_theta = g.role == GateRole::WeightOnly || g.role == GateRole::WeightData;
    const bool wants_k = g.role == GateRole::DataOnly || g.role == GateRole::WeightData;
    if (wants_theta != g.theta.has_value()) {
        throw ConfigError(wants_theta ? "missing theta" + at : "unexpected theta" + at);
    }
    if (wants_k != g.feature_index.has_value()) {
        throw ConfigError(wants_k ? "missing feature_index" + at : "unexpected feature_index" + at);
    }
    if (g.theta && !(*g.theta >= -1.0 && *g.theta <= 1.0)) {
        throw ConfigError("theta out of range [-1, 1]" + at);
    }
    if (g.feature_index && (*g.feature_index < 0 || *g.feature_index >= feature_dim)) {
        throw ConfigError("feature_index out of range" + at);
    }
}

}  // namespace

void FeatureMapCircuit::append(const PlacedGate& gate) {
    check_gate(gate, feature_dim, gates.size());
    gates.push_back(gate);
    if (gate.kind == GateKind::CZ && gates.back().q1 < gates.back().q0) {
        std::swap(gates.back().q0, gates.back().q1);
    }
    num_qubits = std::max(num_qubits, gate.max_qubit() + 1);
}

void FeatureMapCircuit::validate() const {
    if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
    int max_used = -1;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        check_gate(gates[i], feature_dim, i);
        if (gates[i].max_qubit() >= num_qubits) {
            throw ConfigError("qubit index " + std::to_string(gates[i].max_qubit()) +
                              " out of range (gate " + std::to_string(i) + ")");
        }
        max_used = std::max(max_used, gates[i].max_qubit());
    }
    const int expected = gates.empty() ? 1 : max_used + 1;
    if (num_qubits != expected) {
        throw ConfigError("num_qubits must be 1 + max qubit index used (no padding)");
    }
}

std::optional<double> bind_angle(const PlacedGate& gate, std::span<const double> x) {
    switch (gate.role) {
        case GateRole::Fixed:
            return std::nullopt;
        case GateRole::WeightOnly:
            if (!gate.theta) throw ConfigError("missing theta on weight gate");
            return *gate.theta;
        case GateRole::DataOnly: {
            if (!gate.feature_index) throw ConfigError("missing feature_index on data gate");
            const int k = *gate.feature_index;
            if (k < 0 || static_cast<std::size_t>(k) >= x.size()) {
                throw ConfigError("feature index " + std::to_string(k) + " out of range");
            }
            return x[static_cast<std::size_t>(k)];
        }
        case GateRole::WeightData: {
            if (!gate.theta) throw ConfigError("missing theta on weight_data gate");
            if (!gate.feature_index) throw ConfigError("missing feature_index on weight_data gate");
            const int k = *gate.feature_index;
            if (k < 0 || static_cast<std::size_t>(k) >= x.size()) {
                throw ConfigError("feature index " + std::to_string(k) + " out of range");
            }
            return *gate.theta * x[static_cast<std::size_t>(k)];
        }
    }
    return std::nullopt;
}

// --- serialization -----------------------------------------------------------

namespace {
constexpr int kSchemaVersion = 1;
constexpr const char* kBitOrder = "q0_leftmost";
}  // namespace

std::string serialize_circuit(const FeatureMapCircuit& circuit, const ModelMeta& meta) {
    circuit.validate();
    json doc;
    doc["schema"] = kSchemaVersion;
    doc["bit_order"] = kBitOrder;
    doc["feature_dim"] = circuit.feature_dim;
    doc["num_qubits"] = circuit.num_qubits;
    json gates = json::array();
    for (const auto& g : circuit.gates) {
        json jg;
        jg["kind"] = std::string(to_string(g.kind));
        if (g.q1 < 0) {
            jg["qubits"] = json::array({g.q0});
        } else {
            jg["qubits"] = json::array({g.q0, g.q1});
        }
        jg["role"] = std::string(to_string(g.role));
        if (g.theta) jg["theta"] = *g.theta;
        if (g.feature_index) jg["feature_index"] = *g.feature_index;
        gates.push_back(std::move(jg));
    }
    doc["gates"] = std::move(gates);

    json jm;
    if (std::holds_alternative<QnnMeta>(meta)) {
        const auto& m = std::get<QnnMeta>(meta);
        jm["type"] = "qnn";
        jm["threshold_b"] = m.threshold_b;
    } else {
        const auto& m = std::get<QsvmMeta>(meta);
        jm["type"] = "qsvm";
        jm["C"] = m.C;
        jm["bias"] = m.bias;
        jm["duals"] = m.duals;
        jm["support_indices"] = m.support_indices;
        jm["support_points"] = m.support_points;
        json labels = json::array();
        for (auto l : m.support_labels) labels.push_back(static_cast<int>(l));
        jm["support_labels"] = std::move(labels);
    }
    doc["model"] = std::move(jm);
    return doc.dump(2);
}

ParsedModel parse_circuit(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed circuit document: ") + e.what());
    }
    try {
        if (!doc.contains("schema") || doc["schema"].get<int>() != kSchemaVersion) {
            throw DataError("unsupported schema version");
        }
        if (doc.value("bit_order", "") != kBitOrder) {
            throw DataError("unsupported bit_order (expected q0_leftmost)");
        }
        ParsedModel out;
        out.circuit.feature_dim = doc.at("feature_dim").get<int>();
        out.circuit.num_qubits = doc.at("num_qubits").get<int>();
        std::size_t index = 0;
        for (const auto& jg : doc.at("gates")) {
            PlacedGate g;
            const auto kind = gate_kind_from_string(jg.at("kind").get<std::string>());
            if (!kind) throw DataError("unknown gate kind '" + jg.at("kind").get<std::string>() +
                                       "' (gate " + std::to_string(index) + ")");
            g.kind = *kind;
            const auto role = gate_role_from_string(jg.at("role").get<std::string>());
            if (!role) throw DataError("unknown gate role '" + jg.at("role").get<std::string>() +
                                       "' (gate " + std::to_string(index) + ")");
            g.role = *role;
            const auto& qs = jg.at("qubits");
            if (qs.size() < 1 || qs.size() > 2) {
                throw DataError("bad qubit list (gate " + std::to_string(index) + ")");
            }
            g.q0 = qs[0].get<int>();
            g.q1 = qs.size() == 2 ? qs[1].get<int>() : -1;
            if (jg.contains("theta")) g.theta = jg["theta"].get<double>();
            if (jg.contains("feature_index")) g.feature_index = jg["feature_index"].get<int>();
            out.circuit.gates.push_back(g);
            ++index;
        }

        const auto& jm = doc.at("model");
        const std::string type = jm.at("type").get<std::string>();
        if (type == "qnn") {
            QnnMeta m;
            m.threshold_b = jm.at("threshold_b").get<double>();
            if (!(m.threshold_b >= -1.0 - 1e-3 && m.threshold_b <= 1.0 + 1e-3)) {
                throw DataError("threshold_b out of range");
            }
            out.meta = m;
        } else if (type == "qsvm") {
            QsvmMeta m;
            m.C = jm.at("C").get<double>();
            m.bias = jm.at("bias").get<double>();
            m.duals = jm.at("duals").get<std::vector<double>>();
            m.support_indices = jm.at("support_indices").get<std::vector<std::uint32_t>>();
            m.support_points = jm.at("support_points").get<std::vector<std::vector<double>>>();
            for (const auto& jl : jm.at("support_labels")) {
                const int l = jl.get<int>();
                if (l != 1 && l != -1) throw DataError("support label must be +-1");
                m.support_labels.push_back(static_cast<std::int8_t>(l));
            }
            const std::size_t ns = m.duals.size();
            if (m.support_indices.size() != ns || m.support_points.size() != ns ||
                m.support_labels.size() != ns) {
                throw DataError("support arrays must have equal length");
            }
            if (m.C <= 0.0) throw DataError("C must be positive");
            out.meta = m;
        } else {
            throw DataError("unknown model type '" + type + "'");
        }

        try {
            out.circuit.validate();
        } catch (const ConfigError& e) {
            throw DataError(e.what());
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed circuit document: ") + e.what());
    }
}

}  // namespace qflair
