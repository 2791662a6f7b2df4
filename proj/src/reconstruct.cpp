#include "qflair/reconstruct.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qflair {

namespace {

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("non-finite ") + what);
}

double checked_loss(const std::function<double(double)>& loss, double theta) {
    const double v = loss(theta);
    if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite loss value at theta=" + std::to_string(theta));
    }
    return v;
}

}  // namespace

double Reconstruction::operator()(double alpha) const {
    return a * std::cos(alpha - b) + c;
}

double eval_reconstruction(const Reconstruction& r, double alpha) { return r(alpha); }

Reconstruction reconstruct(const ReconstructionSamples& s) {
    check_finite(s.alpha0, "alpha0");
    check_finite(s.z0, "z0");
    check_finite(s.z_plus, "z_plus");
    check_finite(s.z_minus, "z_minus");

    // The interpolation property defines the branch: with
    //   P = (2 z0 - z+ - z-)/2,  Q = (z- - z+)/2
    // the curve a*cos(alpha - b) + c with a = |(P, Q)|, b = alpha0 - atan2(Q, P)
    // passes through all three samples.
    Reconstruction r;
    r.samples = s;
    r.c = 0.5 * (s.z_plus + s.z_minus);
    const double p = 0.5 * (2.0 * s.z0 - s.z_plus - s.z_minus);
    const double q = 0.5 * (s.z_minus - s.z_plus);
    r.a = std::sqrt(p * p + q * q);
    r.b = r.a > 0.0 ? s.alpha0 - std::atan2(q, p) : s.alpha0;

    const double tol = 1e-9;
    if (std::abs(r(s.alpha0) - s.z0) > tol ||
        std::abs(r(s.alpha0 + M_PI_2) - s.z_plus) > tol ||
        std::abs(r(s.alpha0 - M_PI_2) - s.z_minus) > tol) {
        throw std::runtime_error("reconstruction failed to interpolate its samples");
    }
    return r;
}

MinimizeResult minimize_theta(const std::function<double(double)>& loss, int grid_points) {
    if (grid_points < 3) throw std::invalid_argument("grid_points must be >= 3");
    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    const double h = 2.0 / (grid_points - 1);
    for (int g = 0; g < grid_points; ++g) {
        grid[static_cast<std::size_t>(g)] = checked_loss(loss, -1.0 + h * g);
    }
    return minimize_theta_on_grid(grid, loss);
}

MinimizeResult minimize_theta_on_grid(std::span<const double> grid_values,
                                      const std::function<double(double)>& loss) {
    const int n = static_cast<int>(grid_values.size());
    if (n < 3) throw std::invalid_argument("grid must have >= 3 points");
    const double h = 2.0 / (n - 1);

    int best = 0;
    for (int g = 0; g < n; ++g) {
        if (!std::isfinite(grid_values[static_cast<std::size_t>(g)])) {
            throw std::runtime_error("non-finite loss value at theta=" +
                                     std::to_string(-1.0 + h * g));
        }
        // ties break toward the smallest theta: strict improvement only
        if (grid_values[static_cast<std::size_t>(g)] < grid_values[static_cast<std::size_t>(best)]) {
            best = g;
        }
    }
    double best_theta = -1.0 + h * best;
    double best_loss = grid_values[static_cast<std::size_t>(best)];

    // golden-section refinement on the bracket around the best grid point
    double lo = best_theta - h;
    double hi = best_theta + h;
    if (lo < -1.0) lo = -1.0;
    if (hi > 1.0) hi = 1.0;
    constexpr double invphi = 0.6180339887498949;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = checked_loss(loss, x1);
    double f2 = checked_loss(loss, x2);
    double refined_theta = x1;
    double refined_loss = f1;
    if (f2 < refined_loss) {
        refined_theta = x2;
        refined_loss = f2;
    }
    while (hi - lo > 1e-6) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = checked_loss(loss, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = checked_loss(loss, x2);
        }
        if (f1 < refined_loss) {
            refined_theta = x1;
            refined_loss = f1;
        }
        if (f2 < refined_loss) {
            refined_theta = x2;
            refined_loss = f2;
        }
    }

    if (refined_loss < best_loss) return {refined_theta, refined_loss};
    return {best_theta, best_loss};
}

}  // namespace qflair
