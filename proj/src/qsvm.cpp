#include "qflair/qsvm.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qflair/error.hpp"
#include "qflair/rng.hpp"

namespace qflair {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Extends a prepared state so the candidate's qubits exist (fresh qubits in |0>).
StateVector extend_for(const StateVector& s, int needed_qubits) {
    StateVector out = s;
    while (out.num_qubits < needed_qubits) out = out.with_appended_qubit();
    return out;
}

}  // namespace

void KernelMatrix::validate() const {
    if (values.size() != n * n) throw DataError("kernel shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (at(i, i) != 1.0) throw DataError("kernel diagonal must be exactly 1");
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(at(i, j) - at(j, i)) > 1e-12) throw DataError("kernel not symmetric");
            if (!(at(i, j) >= 0.0 && at(i, j) <= 1.0 + 1e-12)) {
                throw DataError("kernel entry outside [0, 1]");
            }
        }
    }
}

double kernel_entry(const FeatureMapCircuit& circuit, std::span<const double> x_i,
                    std::span<const double> x_j) {
    return state_fidelity(prepare_state(circuit, x_i), prepare_state(circuit, x_j));
}

double kernel_entry(const FeatureMapCircuit& circuit, std::span<const double> x_i,
                    std::span<const double> x_j, ShotSampler& sampler) {
    // the all-zero transition probability of U^dag(x_j) U(x_i) equals the fidelity
    return sampler.estimate(kernel_entry(circuit, x_i, x_j));
}

KernelMatrix kernel_matrix(const FeatureMapCircuit& circuit, const DataView& points,
                           ShotSampler& sampler) {
    if (points.n == 0) throw std::invalid_argument("kernel needs at least one point");
    KernelMatrix k;
    k.n = points.n;
    k.values.assign(points.n * points.n, 1.0);
    k.point_ids.resize(points.n);
    std::iota(k.point_ids.begin(), k.point_ids.end(), 0u);

    std::vector<StateVector> states;
    states.reserve(points.n);
    for (std::size_t i = 0; i < points.n; ++i) {
        states.push_back(prepare_state(circuit, points.row(i)));
    }
    for (std::size_t i = 0; i < points.n; ++i) {
        for (std::size_t j = i + 1; j < points.n; ++j) {
            const double v = sampler.estimate(state_fidelity(states[i], states[j]));
            k.at(i, j) = v;
            k.at(j, i) = v;
        }
        k.at(i, i) = 1.0;  // never estimated
    }
    return k;
}

KernelMatrix kernel_matrix(const FeatureMapCircuit& circuit, const DataView& points) {
    ShotSampler exact;
    return kernel_matrix(circuit, points, exact);
}

double target_alignment_loss(const KernelMatrix& kernel, std::span<const std::int8_t> labels) {
    if (labels.size() != kernel.n) throw std::invalid_argument("label count mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < kernel.n; ++i) {
        for (std::size_t j = 0; j < kernel.n; ++j) {
            const double v = kernel.at(i, j);
            num += static_cast<double>(labels[i]) * static_cast<double>(labels[j]) * v;
            den += v * v;
        }
    }
    assert(den > 0.0);  // unit diagonal rules out an all-zero kernel
    return -num / (static_cast<double>(kernel.n) * std::sqrt(den));
}

PairReconstruction probe_pair_reconstruction(const FeatureMapCircuit& circuit,
                                             std::span<const double> x_i,
                                             std::span<const double> x_j,
                                             const PlacedGate& candidate,
                                             std::optional<double> z0, ShotSampler* sampler,
                                             std::uint32_t id_i, std::uint32_t id_j) {
    const int needed = std::max(circuit.num_qubits, candidate.max_qubit() + 1);
    StateVector si = extend_for(prepare_state(circuit, x_i), needed);
    StateVector sj = extend_for(prepare_state(circuit, x_j), needed);

    GateKind rot = candidate.kind;
    int rq0 = candidate.q0;
    int rq1 = candidate.q1;
    if (candidate.kind == GateKind::CzHRz) {
        // fixed prefix on both states; the free angle is the trailing RZ
        for (StateVector* s : {&si, &sj}) {
            apply_gate_inplace(*s, BoundGate::cz(candidate.q0, candidate.q1));
            apply_gate_inplace(*s, BoundGate::h(candidate.q1));
        }
        rot = GateKind::RZ;
        rq0 = candidate.q1;
        rq1 = -1;
    } else if (!is_rotation(candidate.kind)) {
        throw std::invalid_argument("pair probe needs a rotation or composite candidate");
    }

    ReconstructionSamples samples;
    samples.alpha0 = 0.0;
    if (z0) {
        samples.z0 = *z0;
    } else {
        const double f = state_fidelity(si, sj);
        samples.z0 = sampler ? sampler->estimate(f) : f;
    }
    const double half_pi = 1.5707963267948966;
    const double fp = state_fidelity(apply_gate(si, BoundGate::rotation(rot, half_pi, rq0, rq1)), sj);
    const double fm = state_fidelity(apply_gate(si, BoundGate::rotation(rot, -half_pi, rq0, rq1)), sj);
    samples.z_plus = sampler ? sampler->estimate(fp) : fp;
    samples.z_minus = sampler ? sampler->estimate(fm) : fm;

    PairReconstruction out;
    out.i = id_i;
    out.j = id_j;
    out.recon = reconstruct(samples);
    return out;
}

TaCandidateCurve::TaCandidateCurve(std::vector<PairReconstruction> pairs,
                                   std::vector<std::int8_t> labels, GateRole role,
                                   std::vector<double> feature_deltas)
    : pairs_(std::move(pairs)), labels_(std::move(labels)), role_(role),
      delta_(std::move(feature_deltas)), n_(labels_.size()) {
    if (role_ != GateRole::WeightOnly && role_ != GateRole::WeightData) {
        throw std::invalid_argument("candidate curve supports weight and weight_data roles");
    }
    if (pairs_.size() != n_ * (n_ - 1) / 2) throw std::invalid_argument("pair count mismatch");
    if (role_ == GateRole::WeightData && delta_.size() != pairs_.size()) {
        throw std::invalid_argument("feature delta count mismatch");
    }
}

std::vector<double> TaCandidateCurve::entries_at(double theta) const {
    std::vector<double> out(pairs_.size());
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
        // a weight-only rotation applies the same angle to both sides: alpha = 0
        const double alpha = role_ == GateRole::WeightData ? theta * delta_[p] : 0.0;
        out[p] = clamp01(pairs_[p].recon(alpha));
    }
    return out;
}

double ta_curve_loss(std::span<const PairReconstruction> pairs,
                     std::span<const std::int8_t> labels, std::span<const double> deltas,
                     double theta) {
    const std::size_t n_pts = labels.size();
    const double n = static_cast<double>(n_pts);
    double num = n;  // diagonal: kappa = 1, y_i^2 = 1
    double den = n;
    std::size_t p = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
        for (std::size_t j = i + 1; j < n_pts; ++j, ++p) {
            const double alpha = deltas.empty() ? 0.0 : theta * deltas[p];
            const double v = clamp01(pairs[p].recon(alpha));
            const double w = static_cast<double>(labels[i]) * static_cast<double>(labels[j]);
            num += 2.0 * w * v;
            den += 2.0 * v * v;
        }
    }
    return -num / (n * std::sqrt(den));
}

void ta_curve_grid(std::span<const PairReconstruction> pairs,
                   std::span<const std::int8_t> labels, std::span<const double> deltas,
                   std::span<double> out) {
    const std::size_t g_count = out.size();
    if (g_count < 3) throw std::invalid_argument("grid must have >= 3 points");
    const double h = 2.0 / static_cast<double>(g_count - 1);
    const std::size_t n_pts = labels.size();
    const double n = static_cast<double>(n_pts);

    std::vector<double> num(g_count, n);
    std::vector<double> den(g_count, n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
        for (std::size_t j = i + 1; j < n_pts; ++j, ++p) {
            const Reconstruction& r = pairs[p].recon;
            const double w = 2.0 * static_cast<double>(labels[i]) * static_cast<double>(labels[j]);
            const double x = deltas.empty() ? 0.0 : deltas[p];
            double cosv = std::cos(-x - r.b);
            double sinv = std::sin(-x - r.b);
            const double cd = std::cos(h * x);
            const double sd = std::sin(h * x);
            for (std::size_t g = 0; g < g_count; ++g) {
                const double v = clamp01(r.a * cosv + r.c);
                num[g] += w * v;
                den[g] += 2.0 * v * v;
                const double next_cos = cosv * cd - sinv * sd;
                sinv = sinv * cd + cosv * sd;
                cosv = next_cos;
            }
        }
    }
    for (std::size_t g = 0; g < g_count; ++g) out[g] = -num[g] / (n * std::sqrt(den[g]));
}

double TaCandidateCurve::operator()(double theta) const {
    return ta_curve_loss(pairs_, labels_,
                         role_ == GateRole::WeightData ? std::span<const double>(delta_)
                                                       : std::span<const double>(),
                         theta);
}

void TaCandidateCurve::grid_losses(std::span<double> out) const {
    ta_curve_grid(pairs_, labels_,
                  role_ == GateRole::WeightData ? std::span<const double>(delta_)
                                                : std::span<const double>(),
                  out);
}

double TaCandidateCurve::variation_hint() const {
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (double theta : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        const double v = (*this)(theta);
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    return hi - lo;
}

TaCandidateCurve candidate_ta_loss(std::vector<PairReconstruction> pairs,
                                   const DataView& batch, GateRole role,
                                   std::optional<int> k) {
    const bool data_dependent = role == GateRole::WeightData || role == GateRole::DataOnly;
    if (data_dependent != k.has_value()) {
        throw std::invalid_argument("feature index must be given exactly for data-dependent roles");
    }
    std::vector<std::int8_t> labels(batch.y, batch.y + batch.n);
    std::vector<double> deltas;
    if (data_dependent) {
        deltas.reserve(pairs.size());
        for (std::size_t i = 0; i < batch.n; ++i) {
            for (std::size_t j = i + 1; j < batch.n; ++j) {
                deltas.push_back(batch.row(i)[static_cast<std::size_t>(*k)] -
                                 batch.row(j)[static_cast<std::size_t>(*k)]);
            }
        }
    }
    return TaCandidateCurve(std::move(pairs), std::move(labels), role, std::move(deltas));
}

// --- SMO ---------------------------------------------------------------------

SvmSolution smo_solve(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                      double C) {
    const std::size_t n = kernel.n;
    if (labels.size() != n) throw std::invalid_argument("label count mismatch");
    if (C <= 0.0) throw std::invalid_argument("C must be positive");
    bool has_pos = false;
    bool has_neg = false;
    for (auto l : labels) {
        if (l > 0) has_pos = true;
        else has_neg = true;
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("both classes must be present");

    constexpr double kTol = 1e-6;
    std::vector<double> a(n, 0.0);
    std::vector<double> grad(n, -1.0);  // G_i = (Qa)_i - 1
    const std::uint64_t max_updates = 10 * static_cast<std::uint64_t>(n) * n;

    SvmSolution sol;
    sol.C = C;
    double last_violation = 0.0;

    for (sol.pair_updates = 0; sol.pair_updates < max_updates; ++sol.pair_updates) {
        // maximal violating pair over m_k = -y_k G_k
        int up = -1;
        int low = -1;
        double m_up = -1e300;
        double m_low = 1e300;
        for (std::size_t k = 0; k < n; ++k) {
            const double m = -static_cast<double>(labels[k]) * grad[k];
            const bool in_up = (labels[k] > 0 && a[k] < C) || (labels[k] < 0 && a[k] > 0.0);
            const bool in_low = (labels[k] < 0 && a[k] < C) || (labels[k] > 0 && a[k] > 0.0);
            if (in_up && m > m_up) {
                m_up = m;
                up = static_cast<int>(k);
            }
            if (in_low && m < m_low) {
                m_low = m;
                low = static_cast<int>(k);
            }
        }
        assert(up >= 0 && low >= 0);
        last_violation = m_up - m_low;
        if (last_violation <= kTol) break;

        const std::size_t i = static_cast<std::size_t>(up);
        const std::size_t j = static_cast<std::size_t>(low);
        const double yi = labels[i];
        const double yj = labels[j];

        // direction d_i = y_i, d_j = -y_j keeps sum(a*y) constant
        double quad = kernel.at(i, i) + kernel.at(j, j) - 2.0 * kernel.at(i, j);
        if (quad < 1e-12) quad = 1e-12;
        double t = last_violation / quad;
        const double ti = yi > 0 ? C - a[i] : a[i];
        const double tj = yj > 0 ? a[j] : C - a[j];
        t = std::min(t, std::min(ti, tj));

        a[i] += yi * t;
        a[j] -= yj * t;
        a[i] = std::clamp(a[i], 0.0, C);
        a[j] = std::clamp(a[j], 0.0, C);
        for (std::size_t k = 0; k < n; ++k) {
            grad[k] += t * static_cast<double>(labels[k]) * (kernel.at(k, i) - kernel.at(k, j));
        }
    }
    sol.kkt_violation = std::max(0.0, last_violation);

    // bias: mean over free support vectors of m_k, else the midpoint rule
    double acc = 0.0;
    std::size_t free_count = 0;
    const double lo_bound = 1e-8 * C;
    const double hi_bound = C - lo_bound;
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] > lo_bound && a[k] < hi_bound) {
            acc += -static_cast<double>(labels[k]) * grad[k];
            ++free_count;
        }
    }
    if (free_count > 0) {
        sol.bias = acc / static_cast<double>(free_count);
    } else {
        double m_up = -1e300;
        double m_low = 1e300;
        for (std::size_t k = 0; k < n; ++k) {
            const double m = -static_cast<double>(labels[k]) * grad[k];
            const bool in_up = (labels[k] > 0 && a[k] < C) || (labels[k] < 0 && a[k] > 0.0);
            const bool in_low = (labels[k] < 0 && a[k] < C) || (labels[k] > 0 && a[k] > 0.0);
            if (in_up) m_up = std::max(m_up, m);
            if (in_low) m_low = std::min(m_low, m);
        }
        sol.bias = 0.5 * (m_up + m_low);
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] > 1e-10 * C) sol.support_indices.push_back(static_cast<std::uint32_t>(k));
    }
    sol.duals = std::move(a);
    return sol;
}

double svm_decision(std::span<const double> kernel_column, std::span<const double> duals,
                    std::span<const std::int8_t> labels, double bias) {
    double acc = bias;
    for (std::size_t i = 0; i < duals.size(); ++i) {
        acc += duals[i] * static_cast<double>(labels[i]) * kernel_column[i];
    }
    return acc;
}

double svm_dual_objective(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                          std::span<const double> duals) {
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t i = 0; i < kernel.n; ++i) {
        lin += duals[i];
        for (std::size_t j = 0; j < kernel.n; ++j) {
            quad += duals[i] * duals[j] * static_cast<double>(labels[i]) *
                    static_cast<double>(labels[j]) * kernel.at(i, j);
        }
    }
    return 0.5 * quad - lin;
}

// --- C selection ---------------------------------------------------------------

std::vector<double> default_c_grid() {
    std::vector<double> grid;
    for (int g = 0; g <= 10; ++g) grid.push_back(std::pow(10.0, -2.0 + 0.5 * g));
    return grid;
}

namespace {

KernelMatrix sub_kernel(const KernelMatrix& k, std::span<const std::uint32_t> idx) {
    KernelMatrix out;
    out.n = idx.size();
    out.values.resize(out.n * out.n);
    out.point_ids.assign(idx.begin(), idx.end());
    for (std::size_t i = 0; i < out.n; ++i) {
        for (std::size_t j = 0; j < out.n; ++j) out.at(i, j) = k.at(idx[i], idx[j]);
    }
    return out;
}

// balanced accuracy of an SVM trained on `train_idx` scored on `test_idx`
double fold_score(const KernelMatrix& k, std::span<const std::int8_t> labels,
                  std::span<const std::uint32_t> train_idx,
                  std::span<const std::uint32_t> test_idx, double C) {
    bool has_pos = false;
    bool has_neg = false;
    for (auto i : train_idx) {
        if (labels[i] > 0) has_pos = true;
        else has_neg = true;
    }
    std::vector<std::int8_t> preds(test_idx.size());
    std::vector<std::int8_t> truth(test_idx.size());
    for (std::size_t t = 0; t < test_idx.size(); ++t) truth[t] = labels[test_idx[t]];

    if (!has_pos || !has_neg) {
        // degenerate training fold: constant majority prediction
        const std::int8_t majority = has_pos ? 1 : -1;
        std::fill(preds.begin(), preds.end(), majority);
        std::size_t pos = 0, neg = 0, pos_ok = 0, neg_ok = 0;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            (truth[t] > 0 ? pos : neg)++;
            if (truth[t] == preds[t]) (truth[t] > 0 ? pos_ok : neg_ok)++;
        }
        const double tp = pos == 0 ? 1.0 : double(pos_ok) / double(pos);
        const double tn = neg == 0 ? 1.0 : double(neg_ok) / double(neg);
        return 0.5 * (tp + tn);
    }

    const KernelMatrix kt = sub_kernel(k, train_idx);
    std::vector<std::int8_t> ly(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) ly[i] = labels[train_idx[i]];
    const SvmSolution sol = smo_solve(kt, ly, C);

    std::vector<double> col(train_idx.size());
    std::size_t pos = 0, neg = 0, pos_ok = 0, neg_ok = 0;
    for (std::size_t t = 0; t < test_idx.size(); ++t) {
        for (std::size_t i = 0; i < train_idx.size(); ++i) col[i] = k.at(train_idx[i], test_idx[t]);
        const std::int8_t pred = svm_label(svm_decision(col, sol.duals, ly, sol.bias));
        (truth[t] > 0 ? pos : neg)++;
        if (pred == truth[t]) (truth[t] > 0 ? pos_ok : neg_ok)++;
    }
    const double tp = pos == 0 ? 1.0 : double(pos_ok) / double(pos);
    const double tn = neg == 0 ? 1.0 : double(neg_ok) / double(neg);
    return 0.5 * (tp + tn);
}

}  // namespace

CSelection select_C(const KernelMatrix& kernel, std::span<const std::int8_t> labels,
                    std::span<const double> grid, std::uint64_t seed, int repetitions) {
    if (grid.empty()) throw std::invalid_argument("C grid must be nonempty");
    const std::size_t n = kernel.n;
    std::vector<std::uint32_t> pos_idx;
    std::vector<std::uint32_t> neg_idx;
    for (std::size_t i = 0; i < n; ++i) {
        (labels[i] > 0 ? pos_idx : neg_idx).push_back(static_cast<std::uint32_t>(i));
    }

    CSelection out;
    out.scores.assign(grid.size(), 0.0);
    out.used_loocv = pos_idx.size() < 5 || neg_idx.size() < 5;

    std::vector<std::vector<std::uint32_t>> folds;
    std::size_t total_folds = 0;

    if (out.used_loocv) {
        // too few points per class for stratified 5-fold
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double acc = 0.0;
            for (std::uint32_t holdout = 0; holdout < n; ++holdout) {
                std::vector<std::uint32_t> train_idx;
                for (std::uint32_t i = 0; i < n; ++i) {
                    if (i != holdout) train_idx.push_back(i);
                }
                const std::uint32_t test_one[1] = {holdout};
                acc += fold_score(kernel, labels, train_idx, test_one, grid[g]);
            }
            out.scores[g] = acc / static_cast<double>(n);
        }
    } else {
        for (int rep = 0; rep < repetitions; ++rep) {
            Rng rng(derive_seed(seed, "cv-fold", static_cast<std::uint64_t>(rep)));
            auto pos = pos_idx;
            auto neg = neg_idx;
            rng.shuffle(pos);
            rng.shuffle(neg);
            folds.assign(5, {});
            for (std::size_t i = 0; i < pos.size(); ++i) folds[i % 5].push_back(pos[i]);
            for (std::size_t i = 0; i < neg.size(); ++i) folds[i % 5].push_back(neg[i]);

            for (int f = 0; f < 5; ++f) {
                std::vector<std::uint32_t> train_idx;
                for (int f2 = 0; f2 < 5; ++f2) {
                    if (f2 == f) continue;
                    train_idx.insert(train_idx.end(), folds[f2].begin(), folds[f2].end());
                }
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    out.scores[g] += fold_score(kernel, labels, train_idx, folds[f], grid[g]);
                }
                ++total_folds;
            }
        }
        for (auto& s : out.scores) s /= static_cast<double>(total_folds);
    }

    // best score, ties toward the smaller C
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return grid[l] < grid[r]; });
    std::size_t best = order[0];
    for (std::size_t oi : order) {
        if (out.scores[oi] > out.scores[best]) best = oi;
    }
    out.C = grid[best];
    return out;
}

// --- kernel repair ---------------------------------------------------------------

void repair_kernel(KernelMatrix& kernel, KernelRepair mode) {
    if (mode == KernelRepair::None) return;
    const std::size_t n = kernel.n;
    const EigenDecomposition eig = jacobi_eigensolve(kernel.values, n);
    const double lambda_min = eig.values.front();
    if (lambda_min >= 0.0) return;

    if (mode == KernelRepair::DiagonalShift) {
        for (std::size_t i = 0; i < n; ++i) kernel.at(i, i) += -lambda_min;
        return;
    }
    // EigenClip: reconstruct with negative eigenvalues clipped to zero
    std::vector<double> rebuilt(n * n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
        const double lam = std::max(eig.values[e], 0.0);
        if (lam == 0.0) continue;
        const double* v = eig.vectors.data() + e * n;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) rebuilt[i * n + j] += lam * v[i] * v[j];
        }
    }
    kernel.values = std::move(rebuilt);
}

}  // namespace qflair
