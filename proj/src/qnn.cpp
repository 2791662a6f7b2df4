#include "qflair/qnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qflair/error.hpp"

namespace qflair {

namespace {
constexpr double kEps = 1e-12;

double clamp01(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }
}  // namespace

double qnn_output(const FeatureMapCircuit& circuit, std::span<const double> x) {
    return 2.0 * allzero_probability(prepare_state(circuit, x)) - 1.0;
}

double qnn_output(const FeatureMapCircuit& circuit, std::span<const double> x,
                  ShotSampler& sampler) {
    return 2.0 * sampler.estimate(allzero_probability(prepare_state(circuit, x))) - 1.0;
}

double log_loss_from_p(double p_allzero, int label) {
    if (label != 1 && label != -1) throw std::invalid_argument("label must be +-1");
    double p = p_allzero;
    if (p < kEps) p = kEps;
    if (p > 1.0 - kEps) p = 1.0 - kEps;
    return label > 0 ? -std::log(p) : -std::log(1.0 - p);
}

double log_loss(double m, int label) { return log_loss_from_p(0.5 * m + 0.5, label); }

LossReport empirical_loss(const FeatureMapCircuit& circuit, const DataView& batch) {
    if (batch.n == 0) throw std::invalid_argument("empty batch");
    LossReport report;
    report.per_point_losses.resize(batch.n);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.n; ++i) {
        const double p = allzero_probability(prepare_state(circuit, batch.row(i)));
        report.per_point_losses[i] = log_loss_from_p(p, batch.y[i]);
        acc += report.per_point_losses[i];
    }
    report.empirical_loss = acc / static_cast<double>(batch.n);
    return report;
}

LossReport empirical_loss(const FeatureMapCircuit& circuit, const DataView& batch,
                          ShotSampler& sampler) {
    if (batch.n == 0) throw std::invalid_argument("empty batch");
    LossReport report;
    report.per_point_losses.resize(batch.n);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.n; ++i) {
        const double p = sampler.estimate(allzero_probability(prepare_state(circuit, batch.row(i))));
        report.per_point_losses[i] = log_loss_from_p(p, batch.y[i]);
        acc += report.per_point_losses[i];
    }
    report.empirical_loss = acc / static_cast<double>(batch.n);
    return report;
}

QnnCandidateCurve::QnnCandidateCurve(std::vector<Reconstruction> recons,
                                     std::vector<std::int8_t> labels, GateRole role,
                                     std::vector<double> feature_values)
    : recons_(std::move(recons)), labels_(std::move(labels)), role_(role),
      xk_(std::move(feature_values)) {
    if (role_ != GateRole::WeightOnly && role_ != GateRole::WeightData) {
        throw std::invalid_argument("candidate curve supports weight and weight_data roles");
    }
    if (recons_.size() != labels_.size()) {
        throw std::invalid_argument("reconstruction count mismatch");
    }
    if (role_ == GateRole::WeightData && xk_.size() != recons_.size()) {
        throw std::invalid_argument("feature value count mismatch");
    }
}

double qnn_curve_loss(std::span<const Reconstruction> recons,
                      std::span<const std::int8_t> labels, std::span<const double> xk,
                      double theta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < recons.size(); ++i) {
        const double alpha = xk.empty() ? theta : theta * xk[i];
        acc += log_loss_from_p(clamp01(recons[i](alpha)), labels[i]);
    }
    return acc / static_cast<double>(recons.size());
}

void qnn_curve_grid(std::span<const Reconstruction> recons,
                    std::span<const std::int8_t> labels, std::span<const double> xk,
                    std::span<double> out) {
    const std::size_t g_count = out.size();
    if (g_count < 3) throw std::invalid_argument("grid must have >= 3 points");
    const double h = 2.0 / static_cast<double>(g_count - 1);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < recons.size(); ++i) {
        const double x = xk.empty() ? 1.0 : xk[i];
        const Reconstruction& r = recons[i];
        // alpha_g = (-1 + g h) x - b: advance by rotation instead of cos() per g
        double cosv = std::cos(-x - r.b);
        double sinv = std::sin(-x - r.b);
        const double cd = std::cos(h * x);
        const double sd = std::sin(h * x);
        const int label = labels[i];
        for (std::size_t g = 0; g < g_count; ++g) {
            double p = r.a * cosv + r.c;
            if (p < kEps) p = kEps;
            if (p > 1.0 - kEps) p = 1.0 - kEps;
            out[g] += label > 0 ? -std::log(p) : -std::log(1.0 - p);
            const double next_cos = cosv * cd - sinv * sd;
            sinv = sinv * cd + cosv * sd;
            cosv = next_cos;
        }
    }
    const double inv = 1.0 / static_cast<double>(recons.size());
    for (auto& v : out) v *= inv;
}

double QnnCandidateCurve::operator()(double theta) const {
    return qnn_curve_loss(recons_, labels_,
                          role_ == GateRole::WeightData ? std::span<const double>(xk_)
                                                        : std::span<const double>(),
                          theta);
}

void QnnCandidateCurve::grid_losses(std::span<double> out) const {
    qnn_curve_grid(recons_, labels_,
                   role_ == GateRole::WeightData ? std::span<const double>(xk_)
                                                 : std::span<const double>(),
                   out);
}

double QnnCandidateCurve::variation_hint() const {
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

QnnCandidateCurve candidate_qnn_loss(std::vector<Reconstruction> recons,
                                     const DataView& batch, GateRole role,
                                     std::optional<int> k) {
    if (recons.size() != batch.n) throw std::invalid_argument("reconstruction count mismatch");
    const bool data_dependent = role == GateRole::WeightData || role == GateRole::DataOnly;
    if (data_dependent != k.has_value()) {
        throw std::invalid_argument("feature index must be given exactly for data-dependent roles");
    }
    std::vector<std::int8_t> labels(batch.y, batch.y + batch.n);
    std::vector<double> xk;
    if (data_dependent) {
        xk.resize(batch.n);
        for (std::size_t i = 0; i < batch.n; ++i) xk[i] = batch.row(i)[static_cast<std::size_t>(*k)];
    }
    return QnnCandidateCurve(std::move(recons), std::move(labels), role, std::move(xk));
}

double fit_threshold(std::span<const double> outputs, std::span<const std::int8_t> labels) {
    if (outputs.empty() || outputs.size() != labels.size()) {
        throw std::invalid_argument("outputs/labels must be nonempty and equal length");
    }
    std::vector<double> sorted(outputs.begin(), outputs.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    constexpr double kDelta = 1e-6;
    std::vector<double> candidates;
    candidates.push_back(-1.0 - kDelta);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    candidates.push_back(1.0 + kDelta);

    std::vector<std::int8_t> preds(outputs.size());
    double best_b = candidates.front();
    double best_acc = -1.0;
    for (const double b : candidates) {
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            preds[i] = outputs[i] - b >= 0.0 ? 1 : -1;
        }
        const double acc = balanced_accuracy(preds, labels);
        if (acc > best_acc) {  // ties keep the earlier (smaller) threshold
            best_acc = acc;
            best_b = b;
        }
    }
    return best_b;
}

double balanced_accuracy(std::span<const std::int8_t> predictions,
                         std::span<const std::int8_t> labels) {
    if (labels.empty() || predictions.size() != labels.size()) {
        throw std::invalid_argument("predictions/labels must be nonempty and equal length");
    }
    std::size_t pos = 0, neg = 0, pos_ok = 0, neg_ok = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 0) {
            ++pos;
            if (predictions[i] > 0) ++pos_ok;
        } else {
            ++neg;
            if (predictions[i] < 0) ++neg_ok;
        }
    }
    // an absent class contributes a perfect ratio by convention
    const double tp = pos == 0 ? 1.0 : static_cast<double>(pos_ok) / static_cast<double>(pos);
    const double tn = neg == 0 ? 1.0 : static_cast<double>(neg_ok) / static_cast<double>(neg);
    return 0.5 * (tp + tn);
}

}  // namespace qflair
