#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qflair/circuit.hpp"
#include "qflair/data.hpp"
#include "qflair/qnn.hpp"
#include "qflair/qsvm.hpp"
#include "qflair/simulator.hpp"

namespace qflair {

enum class ModelType { Qnn, Qsvm };
enum class PoolProfile { Qnn, QsvmSim, QsvmHw };
enum class TrainMode { Full, AblateGate, AblateFeature, AblateWeight, Traditional };
enum class ProbePolicy { AllQubits, Restricted };

// One pool entry: a gate kind with the role variants it is probed as.
// Variants of the same kind share one reconstruction per point (or pair).
struct PoolEntry {
    GateKind kind;
    std::vector<GateRole> roles;
};

struct GatePool {
    PoolProfile profile = PoolProfile::Qnn;
    std::vector<PoolEntry> entries;

    static GatePool standard(PoolProfile profile);

    // QSVM pools must be data-dependent throughout (gate erasure).
    void validate_for(ModelType type) const;
};

struct TrainConfig {
    double delta_l = 1e-3;        // stop when loss improvement falls below
    int max_gates = 200;
    int qubit_cap = 10;           // <= simulator cap
    std::size_t batch_size = 0;   // 0 = full batch
    std::uint64_t seed = 0;
    std::uint32_t shots = 0;      // 0 = exact expectations
    TrainMode mode = TrainMode::Full;
    ProbePolicy probe_policy = ProbePolicy::AllQubits;
    int grid_points = 201;
    // metrics-time evaluation: 0 disables per-iteration accuracy rows'
    // accuracy columns entirely except the final ones
    bool eval_accuracy_each_iteration = true;
    std::size_t test_cap = 0;     // cap test points per iteration row, 0 = all
    double intermediate_C = 1.0;  // QSVM trace solves before final C selection
    std::vector<double> c_grid;   // empty = default_c_grid()
    KernelRepair repair = KernelRepair::None;
};

// Counts simulator expectation/fidelity calls made for training (probing and
// cache refresh). Diagnostic evaluations (accuracy traces, threshold fit,
// final model evaluation) are not counted.
struct EvalCounter {
    std::uint64_t iteration = 0;
    std::uint64_t total = 0;

    void begin_iteration() { iteration = 0; }
    void add(std::uint64_t k) {
        iteration += k;
        total += k;
    }
};

// An enumerated candidate: gate kind + role + placement. Ordinal is the
// position in enumeration order and breaks selection ties.
struct Candidate {
    GateKind kind;
    GateRole role;
    int q0 = 0;
    int q1 = -1;
    std::size_t ordinal = 0;
};

struct CandidateOutcome {
    GateKind kind = GateKind::H;
    GateRole role = GateRole::Fixed;
    int q0 = 0;
    int q1 = -1;
    std::optional<int> k_star;
    std::optional<double> theta_star;
    double loss_star = 0.0;
    bool modifies_loss = false;  // loss curve non-constant over the probe
    std::size_t ordinal = 0;

    PlacedGate to_gate() const;
};

struct IterationRecord {
    int iteration = 0;
    int gates = 0;
    int qubits = 0;
    double train_loss = 0.0;
    double train_bal_acc = 0.0;
    double test_bal_acc = 0.0;
    std::uint64_t evals_iter = 0;
    std::uint64_t evals_total = 0;
    std::string selected_gate;
    std::string selected_qubits;
    std::optional<int> selected_feature;
    std::optional<double> selected_theta;
};

inline constexpr std::string_view kMetricsHeader =
    "iteration,gates,qubits,train_loss,train_bal_acc,test_bal_acc,"
    "evals_iter,evals_total,selected_gate,selected_qubits,selected_feature,selected_theta";

void write_metrics_csv(const std::string& path, std::span<const IterationRecord> trace);

struct TrainedModel {
    ModelType type = ModelType::Qnn;
    FeatureMapCircuit circuit;
    ModelMeta meta;
};

struct TrainResult {
    TrainedModel model;
    std::vector<IterationRecord> trace;
    double final_train_loss = 0.0;
    double final_train_bal_acc = 0.0;
    double final_test_bal_acc = 0.0;
    std::uint64_t total_evals = 0;
    int iterations = 0;
    bool converged = false;  // stopped on delta_l rather than max_gates
};

// The growth engine. Owns the circuit under construction plus the output /
// kernel caches that make z0 reuse possible across iterations.
class Trainer {
public:
    Trainer(ModelType type, const Dataset& train_data, const GatePool& pool,
            const TrainConfig& cfg);
    ~Trainer();
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    // Candidates for the current circuit under the configured policy.
    std::vector<Candidate> enumerate_candidates() const;

    // Probes every candidate on the given batch (training-set indices).
    // Outcomes align with enumerate_candidates() order. Reconstructions are
    // shared between role variants of the same kind and placement.
    std::vector<CandidateOutcome> probe_all(std::span<const std::uint32_t> batch);

    struct StepResult {
        CandidateOutcome selected;
        double incumbent_loss = 0.0;  // batch loss of the circuit before the step
        std::vector<std::uint32_t> batch;
    };

    // One growth step on an explicit batch; applies the configured mode's
    // selection rule, appends the winner and updates caches. Returns nullopt
    // when no candidate exists (or no candidate can modify the loss in
    // ablate_gate mode).
    std::optional<StepResult> step_on_batch(std::span<const std::uint32_t> batch);

    // Samples the iteration batch (uniform without replacement) and steps.
    std::optional<StepResult> step();

    // Incumbent loss on a batch using cached outputs (refreshes stale cache
    // entries, which counts as evaluations).
    double batch_loss(std::span<const std::uint32_t> batch);

    // Kernel over the given training indices from the cache (QSVM);
    // refreshes stale entries without counting when count_evals is false.
    KernelMatrix batch_kernel(std::span<const std::uint32_t> batch, bool count_evals = false);

    const FeatureMapCircuit& circuit() const { return circuit_; }
    const EvalCounter& evals() const { return evals_; }
    int iteration() const { return iteration_; }
    ModelType model_type() const { return type_; }

    // Fresh kernel over the full training set (QSVM; refreshes stale
    // entries without counting, used at finalization/diagnostics).
    const KernelMatrix& full_kernel();

    // Current-circuit QNN outputs m for the given points (diagnostic).
    std::vector<double> qnn_outputs(const DataView& points) const;

    std::vector<std::uint32_t> sample_batch();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;

    ModelType type_;
    FeatureMapCircuit circuit_;
    EvalCounter evals_;
    int iteration_ = 0;
};

// Full training loop: grows from the empty ansatz until the loss improvement
// drops below delta_l or max_gates is reached, then fits the decision layer
// (QNN threshold / QSVM C selection + SMO) and evaluates both splits.
TrainResult train(ModelType type, const Dataset& train_data, const Dataset& test_data,
                  const GatePool& pool, const TrainConfig& cfg);

// Model evaluation used by the trainer and the eval command.
double evaluate_qnn(const QnnModel& model, const Dataset& data, ShotSampler* sampler = nullptr);
double evaluate_qsvm(const FeatureMapCircuit& circuit, const QsvmMeta& meta,
                     const Dataset& data, ShotSampler* sampler = nullptr);

}  // namespace qflair
