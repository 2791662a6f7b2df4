#pragma once

#include <functional>
#include <span>

namespace qflair {

// Three expectation-value samples at alpha0 and alpha0 +- pi/2.
struct ReconstructionSamples {
    double alpha0 = 0.0;
    double z0 = 0.0;
    double z_plus = 0.0;
    double z_minus = 0.0;
};

// f(alpha) = a*cos(alpha - b) + c, the unique member of that family through
// the three samples.
struct Reconstruction {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    ReconstructionSamples samples;

    double operator()(double alpha) const;
};

Reconstruction reconstruct(const ReconstructionSamples& samples);

double eval_reconstruction(const Reconstruction& r, double alpha);

struct MinimizeResult {
    double theta = 0.0;
    double loss = 0.0;
};

// Minimizes loss over theta in [-1, 1]: uniform grid of grid_points values,
// ties broken toward the smallest theta, then golden-section refinement
// around the best grid point to width 1e-6. The result is never worse than
// the best grid value. Throws on a non-finite loss value.
MinimizeResult minimize_theta(const std::function<double(double)>& loss,
                              int grid_points = 201);

// Same selection and refinement semantics, but with the grid values already
// evaluated by the caller (grid_values[g] = loss(-1 + 2g/(G-1))). Used by the
// candidate scanners, which batch-evaluate grids cheaply.
MinimizeResult minimize_theta_on_grid(std::span<const double> grid_values,
                                      const std::function<double(double)>& loss);

}  // namespace qflair
