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

struct QnnModel {
    FeatureMapCircuit circuit;
    double threshold_b = 0.0;
};

struct LossReport {
    double empirical_loss = 0.0;
    std::vector<double> per_point_losses;
};

// Model output m = 2*P(all-zero) - 1 in [-1, 1]. The projector observable
// yields P in [0, 1]; the affine map restores the two-sided output range the
// decision rule and loss assume, and preserves the sinusoidal form.
double qnn_output(const FeatureMapCircuit& circuit, std::span<const double> x);
double qnn_output(const FeatureMapCircuit& circuit, std::span<const double> x,
                  ShotSampler& sampler);

// Negative log likelihood of label y in {-1,+1} under p(+1) = m/2 + 0.5,
// clamped to [eps, 1-eps] with eps = 1e-12.
double log_loss(double m, int label);

// Same loss written over the all-zero probability P = p(+1) directly.
double log_loss_from_p(double p_allzero, int label);

LossReport empirical_loss(const FeatureMapCircuit& circuit, const DataView& batch);
LossReport empirical_loss(const FeatureMapCircuit& circuit, const DataView& batch,
                          ShotSampler& sampler);

// Candidate loss curve over theta assembled from per-point reconstructions
// of the all-zero probability. WeightData substitutes alpha = theta * x_k;
// WeightOnly uses alpha = theta; DataOnly is the fixed point theta = 1.
class QnnCandidateCurve {
public:
    QnnCandidateCurve(std::vector<Reconstruction> recons, std::vector<std::int8_t> labels,
                      GateRole role, std::vector<double> feature_values);

    // mean log loss at this theta
    double operator()(double theta) const;

    // Batch-evaluates the loss on a uniform theta grid over [-1, 1] using an
    // incremental phase rotation per point (exact up to rounding).
    void grid_losses(std::span<double> out) const;

    // max - min over a coarse probe; used to detect candidates that cannot
    // change the loss.
    double variation_hint() const;

    GateRole role() const { return role_; }
    std::size_t size() const { return recons_.size(); }

private:
    std::vector<Reconstruction> recons_;
    std::vector<std::int8_t> labels_;
    GateRole role_;
    std::vector<double> xk_;  // per-point x[k]; empty for WeightOnly
};

QnnCandidateCurve candidate_qnn_loss(std::vector<Reconstruction> recons,
                                     const DataView& batch, GateRole role,
                                     std::optional<int> k);

// Span-level curve primitives (shared by the candidate curve and the
// trainer's feature scan). xk empty means alpha = theta; otherwise
// alpha_i = theta * xk[i].
double qnn_curve_loss(std::span<const Reconstruction> recons,
                      std::span<const std::int8_t> labels, std::span<const double> xk,
                      double theta);
void qnn_curve_grid(std::span<const Reconstruction> recons,
                    std::span<const std::int8_t> labels, std::span<const double> xk,
                    std::span<double> out);

// ROC-style threshold fit: candidate thresholds at midpoints of consecutive
// distinct outputs plus sentinels just outside [-1, 1]; maximizes training
// balanced accuracy of sign(m - b), ties toward the smaller b.
double fit_threshold(std::span<const double> outputs, std::span<const std::int8_t> labels);

// Mean of per-class correct ratios; a class absent from the labels
// contributes 1.
double balanced_accuracy(std::span<const std::int8_t> predictions,
                         std::span<const std::int8_t> labels);

}  // namespace qflair
