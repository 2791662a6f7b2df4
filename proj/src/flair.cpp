#include "qflair/flair.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "qflair/error.hpp"
#include "qflair/reconstruct.hpp"
#include "qflair/rng.hpp"

namespace qflair {

namespace {

constexpr double kHalfPi = 1.5707963267948966;
constexpr double kModifyTol = 1e-12;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

PlacedGate CandidateOutcome::to_gate() const {
    PlacedGate g;
    g.kind = kind;
    g.q0 = q0;
    g.q1 = q1;
    g.role = role;
    if (role == GateRole::WeightOnly || role == GateRole::WeightData) {
        g.theta = theta_star.value();
    }
    if (role == GateRole::DataOnly || role == GateRole::WeightData) {
        g.feature_index = k_star.value();
    }
    if (g.kind == GateKind::CZ && g.q1 >= 0 && g.q1 < g.q0) std::swap(g.q0, g.q1);
    return g;
}

GatePool GatePool::standard(PoolProfile profile) {
    using K = GateKind;
    using R = GateRole;
    GatePool p;
    p.profile = profile;
    switch (profile) {
        case PoolProfile::Qnn:
            p.entries = {{K::RX, {R::WeightOnly, R::WeightData}},
                         {K::RY, {R::WeightOnly, R::WeightData}},
                         {K::RXX, {R::WeightOnly, R::WeightData}},
                         {K::RYY, {R::WeightOnly, R::WeightData}},
                         {K::H, {R::Fixed}}};
            break;
        case PoolProfile::QsvmSim:
            p.entries = {{K::RZ, {R::WeightData}},
                         {K::CzHRz, {R::WeightData}},
                         {K::RXX, {R::WeightData}},
                         {K::RYY, {R::WeightData}},
                         {K::RZZ, {R::WeightData}}};
            break;
        case PoolProfile::QsvmHw:
            p.entries = {{K::RX, {R::WeightData}},  {K::RY, {R::WeightData}},
                         {K::RZ, {R::WeightData}},  {K::RXX, {R::WeightData}},
                         {K::RYY, {R::WeightData}}, {K::RZZ, {R::WeightData}}};
            break;
    }
    return p;
}

void GatePool::validate_for(ModelType type) const {
    if (entries.empty()) return;  // an empty pool enumerates nothing
    for (const auto& e : entries) {
        if (e.roles.empty()) throw ConfigError("pool entry without roles");
        for (const auto r : e.roles) {
            if (!kind_allows_role(e.kind, r)) {
                throw ConfigError("pool entry " + std::string(to_string(e.kind)) +
                                  " cannot take role " + std::string(to_string(r)));
            }
            if (type == ModelType::Qsvm && r != GateRole::WeightData && r != GateRole::DataOnly) {
                throw ConfigError("qsvm pools must be data-dependent throughout "
                                  "(trailing data-independent gates cancel in the kernel)");
            }
        }
    }
}

void write_metrics_csv(const std::string& path, std::span<const IterationRecord> trace) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    std::fprintf(f, "%s\n", std::string(kMetricsHeader).c_str());
    for (const auto& r : trace) {
        std::fprintf(f, "%d,%d,%d,%.12g,%.12g,%.12g,%llu,%llu,%s,%s,", r.iteration, r.gates,
                     r.qubits, r.train_loss, r.train_bal_acc, r.test_bal_acc,
                     static_cast<unsigned long long>(r.evals_iter),
                     static_cast<unsigned long long>(r.evals_total), r.selected_gate.c_str(),
                     r.selected_qubits.c_str());
        if (r.selected_feature) std::fprintf(f, "%d", *r.selected_feature);
        std::fprintf(f, ",");
        if (r.selected_theta) std::fprintf(f, "%.12g", *r.selected_theta);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

// --- trainer internals -----------------------------------------------------

namespace {

// A probe group: one gate kind + placement whose role variants share
// reconstructions.
struct Group {
    GateKind kind;
    int q0;
    int q1;
    std::vector<std::pair<GateRole, std::size_t>> variants;  // role, ordinal

    int max_qubit() const { return q1 < 0 ? q0 : std::max(q0, q1); }
};

std::vector<Group> group_candidates(std::span<const Candidate> candidates) {
    std::vector<Group> groups;
    for (const auto& c : candidates) {
        if (groups.empty() || groups.back().kind != c.kind || groups.back().q0 != c.q0 ||
            groups.back().q1 != c.q1) {
            groups.push_back({c.kind, c.q0, c.q1, {}});
        }
        groups.back().variants.emplace_back(c.role, c.ordinal);
    }
    return groups;
}

// Winner bookkeeping for cache updates after selection.
struct UpdatePayload {
    std::vector<Reconstruction> recons;     // QNN rotations, batch order
    std::vector<double> fixed_p;            // QNN fixed kinds, batch order
    std::vector<PairReconstruction> pairs;  // QSVM, i<j batch order
    bool identity = false;                  // no cache change (QSVM fixed kind)
};

}  // namespace

struct Trainer::Impl {
    const Dataset& data;
    GatePool pool;
    TrainConfig cfg;

    Rng batch_rng;
    Rng ablate_rng;
    Rng trad_rng;
    ShotSampler sampler;       // training-side estimates (counted)
    ShotSampler diag_sampler;  // uncounted refreshes

    // QNN: all-zero probability per training point under the current circuit
    std::vector<double> p_cache;
    std::vector<std::uint32_t> p_version;
    // QSVM: full training kernel with per-entry freshness
    std::vector<double> k_cache;
    std::vector<std::uint32_t> k_version;
    std::uint32_t version = 0;
    KernelMatrix full_kernel_cache;

    // per-step scratch
    std::vector<StateVector> states;      // batch states, current circuit
    std::vector<StateVector> states_ext;  // with one fresh qubit appended
    bool have_ext = false;

    Impl(const Dataset& d, GatePool p, const TrainConfig& c)
        : data(d), pool(std::move(p)), cfg(c),
          batch_rng(derive_seed(c.seed, "batch")),
          ablate_rng(derive_seed(c.seed, "ablate")),
          trad_rng(derive_seed(c.seed, "traditional")),
          sampler(c.shots, derive_seed(c.seed, "shots")),
          diag_sampler(c.shots, derive_seed(c.seed, "diag-refresh")) {}

    double kernel_at(std::size_t i, std::size_t j) const { return k_cache[i * data.n + j]; }
    void set_kernel(std::size_t i, std::size_t j, double v) {
        k_cache[i * data.n + j] = v;
        k_cache[j * data.n + i] = v;
    }
};

Trainer::Trainer(ModelType type, const Dataset& train_data, const GatePool& pool,
                 const TrainConfig& cfg)
    : impl_(std::make_unique<Impl>(train_data, pool, cfg)), type_(type) {
    if (train_data.n == 0) throw ConfigError("empty training set");
    if (cfg.qubit_cap < 1 || cfg.qubit_cap > kMaxQubits) {
        throw ConfigError("qubit_cap must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
    if (cfg.grid_points < 3) throw ConfigError("grid_points must be >= 3");
    pool.validate_for(type);
    if (cfg.mode == TrainMode::Traditional && type != ModelType::Qnn) {
        throw ConfigError("traditional mode is only defined for the qnn model");
    }
    circuit_ = FeatureMapCircuit::empty(static_cast<int>(train_data.d));

    if (type == ModelType::Qnn) {
        // empty ansatz: P(all-zero) = 1 for every point, known classically
        impl_->p_cache.assign(train_data.n, 1.0);
        impl_->p_version.assign(train_data.n, 0);
    } else {
        impl_->k_cache.assign(train_data.n * train_data.n, 1.0);
        impl_->k_version.assign(train_data.n * train_data.n, 0);
    }
}

Trainer::~Trainer() = default;

std::vector<std::uint32_t> Trainer::sample_batch() {
    const std::size_t n = impl_->data.n;
    const std::size_t b = impl_->cfg.batch_size;
    if (b == 0 || b >= n) {
        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0u);
        return all;
    }
    auto idx = impl_->batch_rng.sample_without_replacement(static_cast<std::uint32_t>(n),
                                                           static_cast<std::uint32_t>(b));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<Candidate> Trainer::enumerate_candidates() const {
    const int active = circuit_.num_qubits;
    const bool can_grow = active < impl_->cfg.qubit_cap;
    const ProbePolicy policy = impl_->cfg.probe_policy;

    std::vector<Candidate> out;
    std::size_t ordinal = 0;
    std::vector<std::pair<int, int>> placements;
    for (const auto& entry : impl_->pool.entries) {
        placements.clear();
        if (!is_two_qubit(entry.kind)) {
            if (policy == ProbePolicy::AllQubits) {
                for (int q = 0; q < active; ++q) placements.emplace_back(q, -1);
                if (can_grow) placements.emplace_back(active, -1);
            } else {
                // hardware-style: a single fresh qubit at the bottom; the
                // bottom active qubit once the cap is reached
                placements.emplace_back(can_grow ? active : active - 1, -1);
            }
        } else if (entry.kind == GateKind::CzHRz) {
            // connects qubits with up to two qubits between them
            if (policy == ProbePolicy::AllQubits) {
                for (int a = 0; a < active; ++a) {
                    for (int b = a + 1; b < std::min(a + 4, active); ++b) {
                        placements.emplace_back(a, b);
                    }
                }
                if (can_grow) placements.emplace_back(active - 1, active);
            } else {
                if (can_grow) {
                    if (active >= 2 && active <= 3) placements.emplace_back(0, active);
                    placements.emplace_back(active - 1, active);
                } else if (active >= 2) {
                    placements.emplace_back(active - 2, active - 1);
                }
            }
        } else {
            if (policy == ProbePolicy::AllQubits) {
                for (int q = 0; q + 1 < active; ++q) placements.emplace_back(q, q + 1);
                if (can_grow) placements.emplace_back(active - 1, active);
            } else {
                // top and bottom linear extensions of the chain
                if (can_grow) {
                    if (active >= 2) placements.emplace_back(0, active);
                    placements.emplace_back(active - 1, active);
                } else if (active >= 2) {
                    placements.emplace_back(active - 2, active - 1);
                }
            }
        }
        for (const auto& [q0, q1] : placements) {
            for (const auto role : entry.roles) {
                if (impl_->cfg.mode == TrainMode::Traditional && role != GateRole::WeightData) {
                    continue;  // the baseline sweeps gate-feature combinations only
                }
                out.push_back({entry.kind, role, q0, q1, ordinal++});
            }
        }
    }
    return out;
}

// --- step machinery -----------------------------------------------------------

namespace {

struct ProbeContext {
    std::vector<std::uint32_t> batch;
    std::vector<std::int8_t> labels;
    double incumbent = 0.0;
};

}  // namespace

double Trainer::batch_loss(std::span<const std::uint32_t> batch) {
    auto& im = *impl_;
    if (type_ == ModelType::Qnn) {
        // refresh stale cached outputs (counts: one evaluation per point)
        double acc = 0.0;
        for (const auto idx : batch) {
            if (im.p_version[idx] != im.version) {
                im.p_cache[idx] =
                    im.sampler.estimate(allzero_probability(prepare_state(circuit_, im.data.row(idx))));
                im.p_version[idx] = im.version;
                evals_.add(1);
            }
            acc += log_loss_from_p(im.p_cache[idx], im.data.y[idx]);
        }
        return acc / static_cast<double>(batch.size());
    }

    // QSVM: refresh stale kernel entries for batch pairs, then TA
    std::vector<StateVector> prepared(batch.size());
    std::vector<bool> have(batch.size(), false);
    auto state_of = [&](std::size_t bi) -> const StateVector& {
        if (!have[bi]) {
            prepared[bi] = prepare_state(circuit_, im.data.row(batch[bi]));
            have[bi] = true;
        }
        return prepared[bi];
    };
    const std::size_t n = im.data.n;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        for (std::size_t bj = bi + 1; bj < batch.size(); ++bj) {
            const std::size_t gi = batch[bi];
            const std::size_t gj = batch[bj];
            if (im.k_version[gi * n + gj] != im.version) {
                const double v = im.sampler.estimate(state_fidelity(state_of(bi), state_of(bj)));
                im.set_kernel(gi, gj, v);
                im.k_version[gi * n + gj] = im.version;
                im.k_version[gj * n + gi] = im.version;
                evals_.add(1);
            }
        }
    }
    KernelMatrix bk = batch_kernel(batch, false);
    std::vector<std::int8_t> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = im.data.y[batch[i]];
    return target_alignment_loss(bk, labels);
}

KernelMatrix Trainer::batch_kernel(std::span<const std::uint32_t> batch, bool count_evals) {
    auto& im = *impl_;
    if (type_ != ModelType::Qsvm) throw ConfigError("batch_kernel requires a qsvm trainer");
    const std::size_t n = im.data.n;
    KernelMatrix out;
    out.n = batch.size();
    out.values.assign(batch.size() * batch.size(), 1.0);
    out.point_ids.assign(batch.begin(), batch.end());
    std::vector<StateVector> prepared(batch.size());
    std::vector<bool> have(batch.size(), false);
    auto state_of = [&](std::size_t bi) -> const StateVector& {
        if (!have[bi]) {
            prepared[bi] = prepare_state(circuit_, im.data.row(batch[bi]));
            have[bi] = true;
        }
        return prepared[bi];
    };
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        for (std::size_t bj = bi + 1; bj < batch.size(); ++bj) {
            const std::size_t gi = batch[bi];
            const std::size_t gj = batch[bj];
            if (im.k_version[gi * n + gj] != im.version) {
                const double v = count_evals
                                     ? im.sampler.estimate(state_fidelity(state_of(bi), state_of(bj)))
                                     : im.diag_sampler.estimate(state_fidelity(state_of(bi), state_of(bj)));
                im.set_kernel(gi, gj, v);
                im.k_version[gi * n + gj] = im.version;
                im.k_version[gj * n + gi] = im.version;
                if (count_evals) evals_.add(1);
            }
            out.at(bi, bj) = im.kernel_at(gi, gj);
            out.at(bj, bi) = out.at(bi, bj);
        }
    }
    return out;
}

const KernelMatrix& Trainer::full_kernel() {
    auto& im = *impl_;
    if (type_ != ModelType::Qsvm) throw ConfigError("full_kernel requires a qsvm trainer");
    std::vector<std::uint32_t> all(im.data.n);
    std::iota(all.begin(), all.end(), 0u);
    im.full_kernel_cache = batch_kernel(all, false);
    return im.full_kernel_cache;
}

std::vector<double> Trainer::qnn_outputs(const DataView& points) const {
    std::vector<double> out(points.n);
    for (std::size_t i = 0; i < points.n; ++i) out[i] = qnn_output(circuit_, points.row(i));
    return out;
}

// Probing, selection and the cache update for one growth step. The heavy
// lifting lives here; public wrappers assemble batches and loop.
std::optional<Trainer::StepResult> Trainer::step_on_batch(std::span<const std::uint32_t> batch) {
    auto& im = *impl_;
    if (batch.empty()) throw ConfigError("empty batch");
    evals_.begin_iteration();

    ProbeContext ctx;
    ctx.batch.assign(batch.begin(), batch.end());
    ctx.labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ctx.labels[i] = im.data.y[batch[i]];
    ctx.incumbent = batch_loss(batch);

    const std::vector<Candidate> candidates = enumerate_candidates();
    if (candidates.empty()) return std::nullopt;
    const std::vector<Group> groups = group_candidates(candidates);

    // prepared incumbent states for the batch
    im.states.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        im.states[i] = prepare_state(circuit_, im.data.row(batch[i]));
    }
    im.have_ext = false;

    auto states_for = [&](int needed_qubits) -> const std::vector<StateVector>& {
        if (needed_qubits <= circuit_.num_qubits) return im.states;
        if (!im.have_ext) {
            im.states_ext.resize(im.states.size());
            for (std::size_t i = 0; i < im.states.size(); ++i) {
                im.states_ext[i] = im.states[i].with_appended_qubit();
            }
            im.have_ext = true;
        }
        return im.states_ext;
    };

    // random draws for the ablation modes happen once per iteration
    double theta_fixed = 0.0;
    int k_fixed = -1;
    if (im.cfg.mode == TrainMode::AblateWeight) theta_fixed = im.ablate_rng.uniform(-1.0, 1.0);
    if (im.cfg.mode == TrainMode::AblateFeature) {
        k_fixed = static_cast<int>(im.ablate_rng.below(im.data.d));
    }

    const bool keep_all = im.cfg.mode == TrainMode::AblateGate;
    std::vector<CandidateOutcome> outcomes;
    outcomes.reserve(candidates.size());
    std::vector<UpdatePayload> group_payloads;  // ablate_gate only
    std::vector<std::size_t> outcome_group;     // candidate -> group id

    CandidateOutcome best;
    best.loss_star = std::numeric_limits<double>::infinity();
    UpdatePayload best_payload;
    bool have_best = false;

    const int grid_n = im.cfg.grid_points;
    std::vector<double> grid(static_cast<std::size_t>(grid_n));
    std::vector<double> xcol(batch.size());
    const std::size_t pair_count = batch.size() * (batch.size() - 1) / 2;
    std::vector<double> dcol;  // per-pair feature deltas (QSVM)

    if (im.cfg.mode == TrainMode::Traditional) {
        // baseline without reconstructions: direct simulation per
        // (candidate, feature) combination at one random weight each
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const Group& group = groups[gi];
            const auto& base = states_for(group.max_qubit() + 1);
            for (const auto& [role, ordinal] : group.variants) {
                assert(role == GateRole::WeightData);
                CandidateOutcome cand;
                cand.kind = group.kind;
                cand.role = role;
                cand.q0 = group.q0;
                cand.q1 = group.q1;
                cand.ordinal = ordinal;
                cand.loss_star = std::numeric_limits<double>::infinity();
                UpdatePayload payload;
                std::vector<double> probe_p(batch.size());
                for (std::size_t k = 0; k < im.data.d; ++k) {
                    const double theta = im.trad_rng.uniform(-1.0, 1.0);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        const double angle = theta * im.data.row(ctx.batch[i])[k];
                        StateVector s = base[i];
                        if (group.kind == GateKind::CzHRz) {
                            apply_gate_inplace(s, BoundGate::cz(group.q0, group.q1));
                            apply_gate_inplace(s, BoundGate::h(group.q1));
                            apply_gate_inplace(s, BoundGate::rotation(GateKind::RZ, angle, group.q1));
                        } else {
                            apply_gate_inplace(s, BoundGate::rotation(group.kind, angle, group.q0, group.q1));
                        }
                        const double p = im.sampler.estimate(allzero_probability(s));
                        probe_p[i] = p;
                        acc += log_loss_from_p(p, ctx.labels[i]);
                    }
                    evals_.add(batch.size());
                    const double loss = acc / static_cast<double>(batch.size());
                    if (loss < cand.loss_star) {
                        cand.loss_star = loss;
                        cand.k_star = static_cast<int>(k);
                        cand.theta_star = theta;
                        payload.fixed_p = probe_p;
                    }
                }
                cand.modifies_loss = std::abs(cand.loss_star - ctx.incumbent) > kModifyTol;
                if (cand.loss_star < best.loss_star) {
                    best = cand;
                    best_payload = payload;
                    have_best = true;
                }
            }
        }
        if (!have_best) return std::nullopt;
    } else {
        for (std::size_t gid = 0; gid < groups.size(); ++gid) {
            const Group& group = groups[gid];
            UpdatePayload payload;
            bool group_has_best = false;

            if (type_ == ModelType::Qnn) {
                const auto& base = states_for(group.max_qubit() + 1);
                if (is_rotation(group.kind) || group.kind == GateKind::CzHRz) {
                    payload.recons.resize(batch.size());
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        ReconstructionSamples smp;
                        smp.alpha0 = 0.0;
                        GateKind rot = group.kind;
                        int rq0 = group.q0;
                        int rq1 = group.q1;
                        if (group.kind == GateKind::CzHRz) {
                            StateVector pre = base[i];
                            apply_gate_inplace(pre, BoundGate::cz(group.q0, group.q1));
                            apply_gate_inplace(pre, BoundGate::h(group.q1));
                            smp.z0 = im.sampler.estimate(allzero_probability(pre));
                            evals_.add(1);
                            rot = GateKind::RZ;
                            rq0 = group.q1;
                            rq1 = -1;
                            smp.z_plus = im.sampler.estimate(allzero_probability(
                                apply_gate(pre, BoundGate::rotation(rot, kHalfPi, rq0))));
                            smp.z_minus = im.sampler.estimate(allzero_probability(
                                apply_gate(std::move(pre), BoundGate::rotation(rot, -kHalfPi, rq0))));
                        } else {
                            smp.z0 = im.p_cache[ctx.batch[i]];  // reused from the last iteration
                            smp.z_plus = im.sampler.estimate(allzero_probability(
                                apply_gate(base[i], BoundGate::rotation(rot, kHalfPi, rq0, rq1))));
                            smp.z_minus = im.sampler.estimate(allzero_probability(
                                apply_gate(base[i], BoundGate::rotation(rot, -kHalfPi, rq0, rq1))));
                        }
                        evals_.add(2);
                        payload.recons[i] = reconstruct(smp);
                    }
                } else {
                    // fixed kind: one direct evaluation per point
                    payload.fixed_p.resize(batch.size());
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        StateVector s = base[i];
                        apply_gate_inplace(s, {group.kind, group.q0, group.q1, 0.0});
                        payload.fixed_p[i] = im.sampler.estimate(allzero_probability(s));
                    }
                    evals_.add(batch.size());
                }
            } else {
                // QSVM: per-pair reconstructions from two shifted fidelities
                const auto& base = states_for(group.max_qubit() + 1);
                if (is_rotation(group.kind) || group.kind == GateKind::CzHRz) {
                    GateKind rot = group.kind;
                    int rq0 = group.q0;
                    int rq1 = group.q1;
                    std::vector<StateVector> phi(batch.size());
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        phi[i] = base[i];
                        if (group.kind == GateKind::CzHRz) {
                            apply_gate_inplace(phi[i], BoundGate::cz(group.q0, group.q1));
                            apply_gate_inplace(phi[i], BoundGate::h(group.q1));
                        }
                    }
                    if (group.kind == GateKind::CzHRz) {
                        rot = GateKind::RZ;
                        rq0 = group.q1;
                        rq1 = -1;
                    }
                    std::vector<StateVector> rot_plus(batch.size());
                    std::vector<StateVector> rot_minus(batch.size());
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        rot_plus[i] = apply_gate(phi[i], BoundGate::rotation(rot, kHalfPi, rq0, rq1));
                        rot_minus[i] = apply_gate(phi[i], BoundGate::rotation(rot, -kHalfPi, rq0, rq1));
                    }
                    payload.pairs.reserve(pair_count);
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        for (std::size_t j = i + 1; j < batch.size(); ++j) {
                            ReconstructionSamples smp;
                            smp.alpha0 = 0.0;
                            smp.z0 = im.kernel_at(ctx.batch[i], ctx.batch[j]);
                            smp.z_plus = im.sampler.estimate(state_fidelity(rot_plus[i], phi[j]));
                            smp.z_minus = im.sampler.estimate(state_fidelity(rot_minus[i], phi[j]));
                            evals_.add(2);
                            PairReconstruction pr;
                            pr.i = static_cast<std::uint32_t>(i);
                            pr.j = static_cast<std::uint32_t>(j);
                            pr.recon = reconstruct(smp);
                            payload.pairs.push_back(std::move(pr));
                        }
                    }
                } else {
                    // trailing fixed gates cancel in the kernel: nothing changes
                    payload.identity = true;
                }
            }

            // evaluate the group's role variants on the shared reconstructions
            for (const auto& [role, ordinal] : group.variants) {
                CandidateOutcome cand;
                cand.kind = group.kind;
                cand.role = role;
                cand.q0 = group.q0;
                cand.q1 = group.q1;
                cand.ordinal = ordinal;

                if (payload.identity) {  // QSVM fixed kind
                    cand.loss_star = ctx.incumbent;
                    cand.modifies_loss = false;
                } else if (type_ == ModelType::Qnn && !payload.fixed_p.empty()) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < batch.size(); ++i) {
                        acc += log_loss_from_p(payload.fixed_p[i], ctx.labels[i]);
                    }
                    cand.loss_star = acc / static_cast<double>(batch.size());
                    cand.modifies_loss = std::abs(cand.loss_star - ctx.incumbent) > kModifyTol;
                } else if (type_ == ModelType::Qnn) {
                    auto scan_feature = [&](int k) {
                        for (std::size_t i = 0; i < batch.size(); ++i) {
                            xcol[i] = im.data.row(ctx.batch[i])[static_cast<std::size_t>(k)];
                        }
                    };
                    const std::span<const Reconstruction> recons(payload.recons);
                    const std::span<const std::int8_t> labels(ctx.labels);
                    if (role == GateRole::WeightOnly) {
                        if (im.cfg.mode == TrainMode::AblateWeight) {
                            cand.loss_star = qnn_curve_loss(recons, labels, {}, theta_fixed);
                            cand.theta_star = theta_fixed;
                            cand.modifies_loss = true;
                        } else {
                            qnn_curve_grid(recons, labels, {}, grid);
                            const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                            cand.modifies_loss = *gmax - *gmin > kModifyTol;
                            const auto res = minimize_theta_on_grid(grid, [&](double t) {
                                return qnn_curve_loss(recons, labels, {}, t);
                            });
                            cand.loss_star = res.loss;
                            cand.theta_star = res.theta;
                        }
                    } else if (role == GateRole::DataOnly) {
                        cand.loss_star = std::numeric_limits<double>::infinity();
                        for (std::size_t k = 0; k < im.data.d; ++k) {
                            scan_feature(static_cast<int>(k));
                            const double loss = qnn_curve_loss(recons, labels, xcol, 1.0);
                            if (loss < cand.loss_star) {
                                cand.loss_star = loss;
                                cand.k_star = static_cast<int>(k);
                            }
                        }
                        cand.modifies_loss = std::abs(cand.loss_star - ctx.incumbent) > kModifyTol;
                    } else {  // WeightData
                        cand.loss_star = std::numeric_limits<double>::infinity();
                        double variation = 0.0;
                        const auto k_range = im.cfg.mode == TrainMode::AblateFeature
                                                 ? std::pair<int, int>{k_fixed, k_fixed + 1}
                                                 : std::pair<int, int>{0, static_cast<int>(im.data.d)};
                        for (int k = k_range.first; k < k_range.second; ++k) {
                            scan_feature(k);
                            if (im.cfg.mode == TrainMode::AblateWeight) {
                                const double loss = qnn_curve_loss(recons, labels, xcol, theta_fixed);
                                if (loss < cand.loss_star) {
                                    cand.loss_star = loss;
                                    cand.k_star = k;
                                    cand.theta_star = theta_fixed;
                                }
                                variation = 1.0;
                            } else {
                                qnn_curve_grid(recons, labels, xcol, grid);
                                const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                                variation = std::max(variation, *gmax - *gmin);
                                const auto res = minimize_theta_on_grid(grid, [&](double t) {
                                    return qnn_curve_loss(recons, labels, xcol, t);
                                });
                                if (res.loss < cand.loss_star) {
                                    cand.loss_star = res.loss;
                                    cand.k_star = k;
                                    cand.theta_star = res.theta;
                                }
                            }
                        }
                        cand.modifies_loss = variation > kModifyTol;
                    }
                } else {
                    // QSVM variational candidate
                    const std::span<const PairReconstruction> pairs(payload.pairs);
                    const std::span<const std::int8_t> labels(ctx.labels);
                    auto scan_deltas = [&](int k) {
                        dcol.clear();
                        dcol.reserve(pair_count);
                        for (std::size_t i = 0; i < batch.size(); ++i) {
                            const double xi = im.data.row(ctx.batch[i])[static_cast<std::size_t>(k)];
                            for (std::size_t j = i + 1; j < batch.size(); ++j) {
                                dcol.push_back(xi - im.data.row(ctx.batch[j])[static_cast<std::size_t>(k)]);
                            }
                        }
                    };
                    if (role == GateRole::WeightOnly) {
                        // same angle on both sides: constant in theta (erasure)
                        cand.loss_star = ta_curve_loss(pairs, labels, {}, 0.0);
                        cand.theta_star = -1.0;  // any theta; tie-break value
                        cand.modifies_loss = false;
                    } else if (role == GateRole::DataOnly) {
                        cand.loss_star = std::numeric_limits<double>::infinity();
                        for (std::size_t k = 0; k < im.data.d; ++k) {
                            scan_deltas(static_cast<int>(k));
                            const double loss = ta_curve_loss(pairs, labels, dcol, 1.0);
                            if (loss < cand.loss_star) {
                                cand.loss_star = loss;
                                cand.k_star = static_cast<int>(k);
                            }
                        }
                        cand.modifies_loss = std::abs(cand.loss_star - ctx.incumbent) > kModifyTol;
                    } else {  // WeightData
                        cand.loss_star = std::numeric_limits<double>::infinity();
                        double variation = 0.0;
                        const auto k_range = im.cfg.mode == TrainMode::AblateFeature
                                                 ? std::pair<int, int>{k_fixed, k_fixed + 1}
                                                 : std::pair<int, int>{0, static_cast<int>(im.data.d)};
                        for (int k = k_range.first; k < k_range.second; ++k) {
                            scan_deltas(k);
                            if (im.cfg.mode == TrainMode::AblateWeight) {
                                const double loss = ta_curve_loss(pairs, labels, dcol, theta_fixed);
                                if (loss < cand.loss_star) {
                                    cand.loss_star = loss;
                                    cand.k_star = k;
                                    cand.theta_star = theta_fixed;
                                }
                                variation = 1.0;
                            } else {
                                ta_curve_grid(pairs, labels, dcol, grid);
                                const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                                variation = std::max(variation, *gmax - *gmin);
                                const auto res = minimize_theta_on_grid(grid, [&](double t) {
                                    return ta_curve_loss(pairs, labels, dcol, t);
                                });
                                if (res.loss < cand.loss_star) {
                                    cand.loss_star = res.loss;
                                    cand.k_star = k;
                                    cand.theta_star = res.theta;
                                }
                            }
                        }
                        cand.modifies_loss = variation > kModifyTol;
                    }
                }

                if (keep_all) {
                    outcomes.push_back(cand);
                    outcome_group.push_back(gid);
                } else if (cand.loss_star < best.loss_star) {
                    best = cand;
                    group_has_best = true;
                    have_best = true;
                }
            }
            if (keep_all) {
                group_payloads.push_back(std::move(payload));
            } else if (group_has_best) {
                best_payload = std::move(payload);
            }
        }

        if (keep_all) {
            // ablate_gate: uniform draw among candidates that can modify the loss
            std::vector<std::size_t> eligible;
            for (std::size_t c = 0; c < outcomes.size(); ++c) {
                if (outcomes[c].modifies_loss) eligible.push_back(c);
            }
            if (eligible.empty()) return std::nullopt;
            const std::size_t pick = eligible[im.ablate_rng.below(eligible.size())];
            best = outcomes[pick];
            best_payload = std::move(group_payloads[outcome_group[pick]]);
            have_best = true;
        }
        if (!have_best) return std::nullopt;
    }

    // append the winner and update the caches from its reconstructions
    circuit_.append(best.to_gate());
    ++im.version;
    if (type_ == ModelType::Qnn) {
        for (std::size_t i = 0; i < ctx.batch.size(); ++i) {
            double p = 0.0;
            if (!best_payload.fixed_p.empty()) {
                p = best_payload.fixed_p[i];
            } else {
                double alpha = 0.0;
                if (best.role == GateRole::WeightOnly) {
                    alpha = *best.theta_star;
                } else if (best.role == GateRole::DataOnly) {
                    alpha = im.data.row(ctx.batch[i])[static_cast<std::size_t>(*best.k_star)];
                } else {
                    alpha = *best.theta_star *
                            im.data.row(ctx.batch[i])[static_cast<std::size_t>(*best.k_star)];
                }
                p = clamp01(best_payload.recons[i](alpha));
            }
            im.p_cache[ctx.batch[i]] = p;
            im.p_version[ctx.batch[i]] = im.version;
        }
    } else {
        const std::size_t n = im.data.n;
        std::size_t p = 0;
        for (std::size_t i = 0; i < ctx.batch.size(); ++i) {
            for (std::size_t j = i + 1; j < ctx.batch.size(); ++j, ++p) {
                const std::size_t gi = ctx.batch[i];
                const std::size_t gj = ctx.batch[j];
                if (!best_payload.identity) {
                    double alpha = 0.0;
                    if (best.role == GateRole::WeightData) {
                        alpha = *best.theta_star *
                                (im.data.row(gi)[static_cast<std::size_t>(*best.k_star)] -
                                 im.data.row(gj)[static_cast<std::size_t>(*best.k_star)]);
                    } else if (best.role == GateRole::DataOnly) {
                        alpha = im.data.row(gi)[static_cast<std::size_t>(*best.k_star)] -
                                im.data.row(gj)[static_cast<std::size_t>(*best.k_star)];
                    }
                    im.set_kernel(gi, gj, clamp01(best_payload.pairs[p].recon(alpha)));
                }
                im.k_version[gi * n + gj] = im.version;
                im.k_version[gj * n + gi] = im.version;
            }
        }
    }
    ++iteration_;

    StepResult result;
    result.selected = best;
    result.incumbent_loss = ctx.incumbent;
    result.batch = std::move(ctx.batch);
    return result;
}

std::optional<Trainer::StepResult> Trainer::step() {
    const auto batch = sample_batch();
    return step_on_batch(batch);
}

std::vector<CandidateOutcome> Trainer::probe_all(std::span<const std::uint32_t> batch) {
    // One probing pass without selection: run the step machinery in a copy?
    // Probing mutates only counters and samplers, so evaluate directly.
    auto& im = *impl_;
    if (batch.empty()) throw ConfigError("empty batch");

    // Reuse step_on_batch's enumeration and evaluation by temporarily
    // switching to ablate_gate bookkeeping is murkier than restating the
    // small amount of shared logic; instead, evaluate via candidate curves.
    std::vector<std::uint32_t> bvec(batch.begin(), batch.end());
    double incumbent = batch_loss(bvec);

    const std::vector<Candidate> candidates = enumerate_candidates();
    const std::vector<Group> groups = group_candidates(candidates);
    std::vector<CandidateOutcome> out;
    out.reserve(candidates.size());

    std::vector<std::int8_t> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = im.data.y[batch[i]];

    im.states.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        im.states[i] = prepare_state(circuit_, im.data.row(batch[i]));
    }
    im.have_ext = false;

    // batch view over the selected rows (owned copies, small)
    std::vector<double> bx(batch.size() * im.data.d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto row = im.data.row(batch[i]);
        std::copy(row.begin(), row.end(), bx.begin() + i * im.data.d);
    }
    DataView bview{bx.data(), labels.data(), batch.size(), im.data.d};

    const int grid_n = im.cfg.grid_points;
    std::vector<double> grid(static_cast<std::size_t>(grid_n));

    for (const Group& group : groups) {
        const bool fresh = group.max_qubit() + 1 > circuit_.num_qubits;
        std::vector<StateVector> base(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            base[i] = fresh ? im.states[i].with_appended_qubit() : im.states[i];
        }

        std::vector<Reconstruction> recons;
        std::vector<PairReconstruction> pairs;
        std::vector<double> fixed_p;
        bool identity = false;

        if (type_ == ModelType::Qnn) {
            if (is_rotation(group.kind) || group.kind == GateKind::CzHRz) {
                recons.resize(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    ReconstructionSamples smp;
                    GateKind rot = group.kind;
                    int rq0 = group.q0;
                    int rq1 = group.q1;
                    StateVector pre = base[i];
                    if (group.kind == GateKind::CzHRz) {
                        apply_gate_inplace(pre, BoundGate::cz(group.q0, group.q1));
                        apply_gate_inplace(pre, BoundGate::h(group.q1));
                        smp.z0 = im.sampler.estimate(allzero_probability(pre));
                        evals_.add(1);
                        rot = GateKind::RZ;
                        rq0 = group.q1;
                        rq1 = -1;
                    } else {
                        smp.z0 = im.p_cache[batch[i]];
                    }
                    smp.z_plus = im.sampler.estimate(allzero_probability(
                        apply_gate(pre, BoundGate::rotation(rot, kHalfPi, rq0, rq1))));
                    smp.z_minus = im.sampler.estimate(allzero_probability(
                        apply_gate(std::move(pre), BoundGate::rotation(rot, -kHalfPi, rq0, rq1))));
                    evals_.add(2);
                    recons[i] = reconstruct(smp);
                }
            } else {
                fixed_p.resize(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    StateVector s = base[i];
                    apply_gate_inplace(s, {group.kind, group.q0, group.q1, 0.0});
                    fixed_p[i] = im.sampler.estimate(allzero_probability(s));
                }
                evals_.add(batch.size());
            }
        } else {
            if (is_rotation(group.kind) || group.kind == GateKind::CzHRz) {
                PlacedGate probe_gate;
                probe_gate.kind = group.kind;
                probe_gate.q0 = group.q0;
                probe_gate.q1 = group.q1;
                pairs.reserve(batch.size() * (batch.size() - 1) / 2);
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    for (std::size_t j = i + 1; j < batch.size(); ++j) {
                        pairs.push_back(probe_pair_reconstruction(
                            circuit_, im.data.row(batch[i]), im.data.row(batch[j]), probe_gate,
                            im.kernel_at(batch[i], batch[j]),
                            im.sampler.exact() ? nullptr : &im.sampler,
                            static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)));
                        evals_.add(2);
                    }
                }
            } else {
                identity = true;
            }
        }

        for (const auto& [role, ordinal] : group.variants) {
            CandidateOutcome cand;
            cand.kind = group.kind;
            cand.role = role;
            cand.q0 = group.q0;
            cand.q1 = group.q1;
            cand.ordinal = ordinal;

            if (identity) {
                cand.loss_star = incumbent;
                cand.modifies_loss = false;
            } else if (!fixed_p.empty()) {
                double acc = 0.0;
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    acc += log_loss_from_p(fixed_p[i], labels[i]);
                }
                cand.loss_star = acc / static_cast<double>(batch.size());
                cand.modifies_loss = std::abs(cand.loss_star - incumbent) > kModifyTol;
            } else if (role == GateRole::WeightOnly) {
                if (type_ == ModelType::Qnn) {
                    auto curve = candidate_qnn_loss(recons, bview, role, std::nullopt);
                    curve.grid_losses(grid);
                    const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                    cand.modifies_loss = *gmax - *gmin > kModifyTol;
                    const auto res =
                        minimize_theta_on_grid(grid, [&](double t) { return curve(t); });
                    cand.loss_star = res.loss;
                    cand.theta_star = res.theta;
                } else {
                    auto curve = candidate_ta_loss(pairs, bview, role, std::nullopt);
                    cand.loss_star = curve(0.0);
                    cand.theta_star = -1.0;
                    cand.modifies_loss = false;
                }
            } else {
                cand.loss_star = std::numeric_limits<double>::infinity();
                double variation = 0.0;
                for (int k = 0; k < static_cast<int>(im.data.d); ++k) {
                    if (role == GateRole::DataOnly) {
                        const double loss =
                            type_ == ModelType::Qnn
                                ? candidate_qnn_loss(recons, bview, role, k)(1.0)
                                : candidate_ta_loss(pairs, bview, role, k)(1.0);
                        if (loss < cand.loss_star) {
                            cand.loss_star = loss;
                            cand.k_star = k;
                        }
                        variation = std::max(variation, std::abs(loss - incumbent));
                    } else if (type_ == ModelType::Qnn) {
                        auto curve = candidate_qnn_loss(recons, bview, role, k);
                        curve.grid_losses(grid);
                        const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                        variation = std::max(variation, *gmax - *gmin);
                        const auto res =
                            minimize_theta_on_grid(grid, [&](double t) { return curve(t); });
                        if (res.loss < cand.loss_star) {
                            cand.loss_star = res.loss;
                            cand.k_star = k;
                            cand.theta_star = res.theta;
                        }
                    } else {
                        auto curve = candidate_ta_loss(pairs, bview, role, k);
                        curve.grid_losses(grid);
                        const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
                        variation = std::max(variation, *gmax - *gmin);
                        const auto res =
                            minimize_theta_on_grid(grid, [&](double t) { return curve(t); });
                        if (res.loss < cand.loss_star) {
                            cand.loss_star = res.loss;
                            cand.k_star = k;
                            cand.theta_star = res.theta;
                        }
                    }
                }
                cand.modifies_loss = variation > kModifyTol;
            }
            out.push_back(cand);
        }
    }
    return out;
}

// --- training loop ---------------------------------------------------------

namespace {

double bal_acc_from_outputs(std::span<const double> outputs, double b,
                            std::span<const std::int8_t> labels) {
    std::vector<std::int8_t> preds(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) preds[i] = outputs[i] - b >= 0.0 ? 1 : -1;
    return balanced_accuracy(preds, labels);
}

std::string qubit_string(const CandidateOutcome& c) {
    std::string s = std::to_string(c.q0);
    if (c.q1 >= 0) s += ";" + std::to_string(c.q1);
    return s;
}

}  // namespace

double evaluate_qnn(const QnnModel& model, const Dataset& data, ShotSampler* sampler) {
    std::vector<std::int8_t> preds(data.n);
    for (std::size_t i = 0; i < data.n; ++i) {
        const double m = sampler ? qnn_output(model.circuit, data.row(i), *sampler)
                                 : qnn_output(model.circuit, data.row(i));
        preds[i] = m - model.threshold_b >= 0.0 ? 1 : -1;
    }
    return balanced_accuracy(preds, data.y);
}

double evaluate_qsvm(const FeatureMapCircuit& circuit, const QsvmMeta& meta,
                     const Dataset& data, ShotSampler* sampler) {
    std::vector<StateVector> support_states;
    support_states.reserve(meta.support_points.size());
    for (const auto& pt : meta.support_points) {
        support_states.push_back(prepare_state(circuit, pt));
    }
    std::vector<double> col(meta.duals.size());
    std::vector<std::int8_t> preds(data.n);
    for (std::size_t t = 0; t < data.n; ++t) {
        const StateVector st = prepare_state(circuit, data.row(t));
        for (std::size_t s = 0; s < support_states.size(); ++s) {
            const double f = state_fidelity(support_states[s], st);
            col[s] = sampler ? sampler->estimate(f) : f;
        }
        preds[t] = svm_label(svm_decision(col, meta.duals, meta.support_labels, meta.bias));
    }
    return balanced_accuracy(preds, data.y);
}

TrainResult train(ModelType type, const Dataset& train_data, const Dataset& test_data,
                  const GatePool& pool, const TrainConfig& cfg) {
    if (cfg.delta_l <= 0.0) throw ConfigError("delta_l must be positive");
    if (train_data.d != test_data.d) throw DataError("train/test dimension mismatch");
    if (type == ModelType::Qsvm) {
        bool pos = false;
        bool neg = false;
        for (auto y : train_data.y) (y > 0 ? pos : neg) = true;
        if (!pos || !neg) {
            throw TrainError("qsvm training needs both classes in the training set (iteration 0)");
        }
    }

    Trainer trainer(type, train_data, pool, cfg);
    ShotSampler diag(cfg.shots, derive_seed(cfg.seed, "diag"));
    ShotSampler* diag_ptr = cfg.shots == 0 ? nullptr : &diag;

    const std::size_t test_cap = cfg.test_cap == 0 ? test_data.n : std::min(cfg.test_cap, test_data.n);
    const Dataset test_slice = subset(test_data, 0, test_cap);

    TrainResult res;
    res.model.type = type;

    for (int it = 1; it <= cfg.max_gates; ++it) {
        auto step = trainer.step();
        if (!step) break;

        IterationRecord row;
        row.iteration = it;
        row.gates = static_cast<int>(trainer.circuit().gates.size());
        row.qubits = trainer.circuit().num_qubits;
        row.train_loss = step->selected.loss_star;
        row.evals_iter = trainer.evals().iteration;
        row.evals_total = trainer.evals().total;
        row.selected_gate = std::string(to_string(step->selected.kind)) + ":" +
                            std::string(to_string(step->selected.role));
        row.selected_qubits = qubit_string(step->selected);
        row.selected_feature = step->selected.k_star;
        row.selected_theta = step->selected.theta_star;

        if (cfg.eval_accuracy_each_iteration) {
            if (type == ModelType::Qnn) {
                std::vector<double> outs(train_data.n);
                for (std::size_t i = 0; i < train_data.n; ++i) {
                    outs[i] = diag_ptr ? qnn_output(trainer.circuit(), train_data.row(i), *diag_ptr)
                                       : qnn_output(trainer.circuit(), train_data.row(i));
                }
                const double b = fit_threshold(outs, train_data.y);
                row.train_bal_acc = bal_acc_from_outputs(outs, b, train_data.y);
                QnnModel m{trainer.circuit(), b};
                row.test_bal_acc = evaluate_qnn(m, test_slice, diag_ptr);
            } else {
                const KernelMatrix bk = trainer.batch_kernel(step->batch, false);
                std::vector<std::int8_t> by(step->batch.size());
                for (std::size_t i = 0; i < step->batch.size(); ++i) by[i] = train_data.y[step->batch[i]];
                const SvmSolution sol = smo_solve(bk, by, cfg.intermediate_C);
                // training accuracy over the batch (classical, from the kernel)
                std::vector<std::int8_t> preds(step->batch.size());
                std::vector<double> colv(step->batch.size());
                for (std::size_t t = 0; t < step->batch.size(); ++t) {
                    for (std::size_t i = 0; i < step->batch.size(); ++i) colv[i] = bk.at(i, t);
                    preds[t] = svm_label(svm_decision(colv, sol.duals, by, sol.bias));
                }
                row.train_bal_acc = balanced_accuracy(preds, by);
                QsvmMeta meta;
                meta.C = cfg.intermediate_C;
                meta.bias = sol.bias;
                for (auto s : sol.support_indices) {
                    meta.duals.push_back(sol.duals[s]);
                    meta.support_indices.push_back(step->batch[s]);
                    const auto r = train_data.row(step->batch[s]);
                    meta.support_points.emplace_back(r.begin(), r.end());
                    meta.support_labels.push_back(by[s]);
                }
                row.test_bal_acc = evaluate_qsvm(trainer.circuit(), meta, test_slice, diag_ptr);
            }
        }
        res.trace.push_back(row);

        const double improvement = step->incumbent_loss - step->selected.loss_star;
        if (improvement < cfg.delta_l) {
            res.converged = true;
            break;
        }
    }

    res.iterations = trainer.iteration();
    res.model.circuit = trainer.circuit();
    res.total_evals = trainer.evals().total;

    // decision layer + final evaluation
    if (type == ModelType::Qnn) {
        std::vector<double> outs(train_data.n);
        for (std::size_t i = 0; i < train_data.n; ++i) {
            outs[i] = diag_ptr ? qnn_output(res.model.circuit, train_data.row(i), *diag_ptr)
                               : qnn_output(res.model.circuit, train_data.row(i));
        }
        const double b = fit_threshold(outs, train_data.y);
        res.model.meta = QnnMeta{b};
        res.final_train_bal_acc = bal_acc_from_outputs(outs, b, train_data.y);
        double acc = 0.0;
        for (std::size_t i = 0; i < train_data.n; ++i) {
            acc += log_loss_from_p(0.5 * outs[i] + 0.5, train_data.y[i]);
        }
        res.final_train_loss = acc / static_cast<double>(train_data.n);
        res.final_test_bal_acc =
            evaluate_qnn(QnnModel{res.model.circuit, b}, test_data, diag_ptr);
    } else {
        KernelMatrix kernel = trainer.full_kernel();
        res.final_train_loss = target_alignment_loss(kernel, train_data.y);
        const std::vector<double> grid = cfg.c_grid.empty() ? default_c_grid() : cfg.c_grid;
        const CSelection cs = select_C(kernel, train_data.y, grid, derive_seed(cfg.seed, "cv"));
        KernelMatrix solver_kernel = kernel;
        repair_kernel(solver_kernel, cfg.repair);
        const SvmSolution sol = smo_solve(solver_kernel, train_data.y, cs.C);

        QsvmMeta meta;
        meta.C = cs.C;
        meta.bias = sol.bias;
        for (auto s : sol.support_indices) {
            meta.duals.push_back(sol.duals[s]);
            meta.support_indices.push_back(s);
            const auto r = train_data.row(s);
            meta.support_points.emplace_back(r.begin(), r.end());
            meta.support_labels.push_back(train_data.y[s]);
        }
        res.model.meta = meta;

        std::vector<std::int8_t> preds(train_data.n);
        std::vector<double> colv(train_data.n);
        for (std::size_t t = 0; t < train_data.n; ++t) {
            for (std::size_t i = 0; i < train_data.n; ++i) colv[i] = kernel.at(i, t);
            preds[t] = svm_label(svm_decision(colv, sol.duals, train_data.y, sol.bias));
        }
        res.final_train_bal_acc = balanced_accuracy(preds, train_data.y);
        res.final_test_bal_acc = evaluate_qsvm(res.model.circuit, meta, test_data, diag_ptr);
    }
    return res;
}

}  // namespace qflair
