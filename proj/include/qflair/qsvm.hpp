#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qflair/circuit.hpp"
#include "qflair/data.hpp"
#include "qflair/reconstruct.hpp"
#include "qflair/simulator.hpp"

namespace qflair {

// Symmetric fidelity-kernel values with unit diagonal.
struct KernelMatrix {
    std::size_t n = 0;
    std::vector<double> values;             // n x n row-major
    std::vector<std::uint32_t> point_ids;   // provenance of rows/columns

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }

    void validate() const;  // symmetry, unit diagonal, range
};

// kappa(x_i, x_j) = |<psi(x_j)|psi(x_i)>|^2; in shot mode the all-zero
// transition probability of U^dag(x_j) U(x_i) estimated with the sampler.
double kernel_entry(const FeatureMapCircuit& circuit, std::span<const double> x_i,
                    std::span<const double> x_j);
double kernel_entry(const FeatureMapCircuit& circuit, std::span<const double> x_i,
                    std::span<const double> x_j, ShotSampler& sampler);

// Upper triangle computed once per pair and mirrored; diagonal set to 1.
KernelMatrix kernel_matrix(const FeatureMapCircuit& circuit, const DataView& points,
                           ShotSampler& sampler);
KernelMatrix kernel_matrix(const FeatureMapCircuit& circuit, const DataView& points);

// L_TA = -(1/N) * sum_ij y_i y_j k_ij / sqrt(sum_ij k_ij^2). Note the 1/N
// prefactor; it is part of the loss definition used throughout.
double target_alignment_loss(const KernelMatrix& kernel, std::span<const std::int8_t> labels);

// Reconstruction of one kernel entry as a function of the relative angle
// alpha = alpha_i - alpha_j of a rotation appended to both sides.
struct PairReconstruction {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    Reconstruction recon;
};

// Probes pair (x_i, x_j) for the given candidate rotation (kind + qubits;
// CzHRz applies its fixed prefix to both states first). z0 is the current
// kernel entry, reused rather than re-simulated when provided. Two shifted
// fidelity evaluations; shot estimates when a sampler is passed.
PairReconstruction probe_pair_reconstruction(const FeatureMapCircuit& circuit,
                                             std::span<const double> x_i,
                                             std::span<const double> x_j,
                                             const PlacedGate& candidate,
                                             std::optional<double> z0 = std::nullopt,
                                             ShotSampler* sampler = nullptr,
                                             std::uint32_t id_i = 0,
                                             std::uint32_t id_j = 1);

// Candidate TA loss curve over theta from per-pair reconstructions.
// WeightData substitutes alpha = theta * (x_ik - x_jk); WeightOnly is
// constant in theta (the gate-erasure situation).
class TaCandidateCurve {
public:
    TaCandidateCurve(std::vector<PairReconstruction> pairs, std::vector<std::int8_t> labels,
                     GateRole role, std::vector<double> feature_deltas);

    double operator()(double theta) const;
    void grid_losses(std::span<double> out) const;
    double variation_hint() const;

    GateRole role() const { return role_; }
    // kernel entries at a given theta, in pair order (clamped to [0, 1])
    std::vector<double> entries_at(double theta) const;
    std::span<const PairReconstruction> pairs() const { return pairs_; }

private:
    std::vector<PairReconstruction> pairs_;  // i < j, row-major pair order
    std::vector<std::int8_t> labels_;
    GateRole role_;
    std::vector<double> delta_;  // per-pair x_ik - x_jk; empty for WeightOnly
    std::size_t n_ = 0;
};

TaCandidateCurve candidate_ta_loss(std::vector<PairReconstruction> pairs,
                                   const DataView& batch, GateRole role,
                                   std::optional<int> k);

// Span-level TA curve primitives. labels are per point (n of them), pairs
// and deltas in row-major i<j order; deltas empty means alpha = 0 for every
// pair (weight-only), otherwise alpha_p = theta * deltas[p].
double ta_curve_loss(std::span<const PairReconstruction> pairs,
                     std::span<const std::int8_t> labels, std::span<const double> deltas,
                     double theta);
void ta_curve_grid(std::span<const PairReconstruction> pairs,
                   std::span<const std::int8_t> labels, std::span<const double> deltas,
                   std::span<double> out);

// --- SVM dual solver ---------------------------------------------------------

struct SvmSolution {
    std::vector<double> duals;  // full length N, a_i in [0, C]
    double bias = 0.0;
    double C = 1.0;
    std::vector<std::uint32_t> support_indices;  // a_i > 0
    double kkt_violation = 0.0;                  // final max violation
    std::uint64_t pair_updates = 0;
};

// C-SVC dual via sequential minimal optimization with maximal-violating-pair
// selection. Stops at max violation <= 1e-6 or 10*N^2 pair updates. Bias from
// the mean over free support vectors, else the midpoint rule.
SvmSolution smo_solve(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                      double C);

double svm_decision(std::span<const double> kernel_column, std::span<const double> duals,
                    std::span<const std::int8_t> labels, double bias);

// (1/2) a^T Q a - e^T a with Q_ij = y_i y_j K_ij; the quantity SMO minimizes.
double svm_dual_objective(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                          std::span<const double> duals);

// sign with sign(0) = +1
inline std::int8_t svm_label(double decision) { return decision >= 0.0 ? 1 : -1; }

struct CSelection {
    double C = 1.0;
    bool used_loocv = false;
    std::vector<double> scores;  // mean balanced accuracy per grid entry
};

// Repeated stratified 5-fold cross-validation (leave-one-out when a class
// has fewer than 5 points) on the precomputed kernel; ties toward smaller C.
CSelection select_C(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                    std::span<const double> grid, std::uint64_t seed, int repetitions = 10);

std::vector<double> default_c_grid();  // 11 points, log-equidistant 1e-2..1e3

// --- optional kernel repair (off by default) ---------------------------------

enum class KernelRepair { None, DiagonalShift, EigenClip };

void repair_kernel(KernelMatrix& kernel, KernelRepair mode);

}  // namespace qflair
