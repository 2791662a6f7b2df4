#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qflair {

// Per-feature affine map x' = scale*x + offset. Constant features map to 0.
struct NormalizationRecord {
    std::vector<double> scale;
    std::vector<double> offset;

    bool empty() const { return scale.empty(); }
};

// Read-only view over row-major features plus labels.
struct DataView {
    const double* x = nullptr;
    const std::int8_t* y = nullptr;
    std::size_t n = 0;
    std::size_t d = 0;

    std::span<const double> row(std::size_t i) const { return {x + i * d, d}; }
};

struct Dataset {
    std::string name;
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> x;       // row-major n x d
    std::vector<std::int8_t> y;  // labels in {-1, +1}
    NormalizationRecord norm;    // map that produced x (empty if identity)

    DataView view() const { return {x.data(), y.data(), n, d}; }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }

    // Range and label invariants; throws DataError.
    void validate() const;
};

// Rows [start, start+count) as a new dataset.
Dataset subset(const Dataset& ds, std::size_t start, std::size_t count);

// --- synthetic generators (deterministic under the seed) -----------------

// Uniform points on [-pi, pi]^d labeled by a fixed random unit normal;
// points closer than `margin` to the plane are resampled.
Dataset gen_linearly_separable(int d, std::size_t n, double margin, std::uint64_t seed);

// Two translated copies of a random closed curve with `curvature` Fourier
// harmonics, offset by `separation`; min-max normalized to [-pi, pi].
Dataset gen_two_curves(int d, std::size_t n, int curvature, double separation,
                       std::uint64_t seed);

// Noisy 4x4 bars (rows constant, label -1) and stripes (columns constant,
// label +1), sampled alternately; min-max normalized to [-pi, pi].
Dataset gen_bars_stripes(std::size_t n, double noise_sigma, std::uint64_t seed);

// --- MNIST (IDX format) ---------------------------------------------------

struct IdxImages {
    std::size_t count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

// Non-overlapping mean pooling of one side x side image over factor x factor
// blocks; factor must divide side.
std::vector<double> pool_downsample(std::span<const double> image, int side, int factor);

// Loads an IDX image/label pair, keeps the two digits (first -> -1,
// second -> +1), flattens row-major, optionally mean-pools by pool_factor,
// truncates to max_n samples (0 = all), and normalizes per feature to
// [-pi, pi]. Training statistics are computed from this data when train_norm
// is null; otherwise the given record is applied with clipping (test mode).
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::pair<int, int> digits = {3, 5},
                       const NormalizationRecord* train_norm = nullptr,
                       int pool_factor = 1, std::size_t max_n = 0);

// --- PCA -------------------------------------------------------------------

struct PcaTransform {
    int d = 0;
    int r = 0;
    std::vector<double> mean;         // d
    std::vector<double> components;   // r x d row-major, orthonormal rows
    std::vector<double> eigenvalues;  // top r, descending
    bool rank_deficient = false;      // reported when data rank < r
};

// Mean-centered covariance eigendecomposition, top-r components by
// eigenvalue, sign fixed so each component's largest-magnitude entry is
// positive. Rank below r is reported via rank_deficient.
PcaTransform pca_fit(std::span<const double> x, std::size_t n, std::size_t d, int r = 10);
std::vector<double> pca_apply(const PcaTransform& t, std::span<const double> x, std::size_t n);

// --- normalization ----------------------------------------------------------

// Per-feature map sending train min -> -pi and train max -> +pi.
NormalizationRecord fit_normalization(std::span<const double> x, std::size_t n, std::size_t d);

// Applies the record; out-of-range results are clipped to [-pi, pi] when
// clip is set (test data).
void apply_normalization(const NormalizationRecord& rec, std::span<double> x,
                         std::size_t n, std::size_t d, bool clip);

// Normalizes both sets from the training statistics and records the map.
void normalize_features(Dataset& train, Dataset& other);

// --- CSV -------------------------------------------------------------------

// Header f0,..,f{d-1},label; IEEE doubles printed with round-trip precision.
void write_dataset_csv(const std::string& path, const Dataset& ds);
Dataset read_dataset_csv(const std::string& path);

// --- small symmetric eigensolver (used by PCA and kernel repair) -----------

// Jacobi eigendecomposition of a dense symmetric matrix (row-major n x n).
// Returns eigenvalues ascending with matching eigenvectors as rows.
struct EigenDecomposition {
    std::vector<double> values;
    std::vector<double> vectors;  // n x n, row i is the eigenvector of values[i]
};
EigenDecomposition jacobi_eigensolve(std::vector<double> matrix, std::size_t n);

}  // namespace qflair
