#include "qflair/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qflair/error.hpp"
#include "qflair/rng.hpp"

namespace qflair {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void Dataset::validate() const {
    if (d == 0) throw DataError("dataset has zero feature dimension");
    if (x.size() != n * d || y.size() != n) throw DataError("dataset shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] != 1 && y[i] != -1) throw DataError("label must be +-1");
    }
    for (double v : x) {
        if (!(v >= -kPi - 1e-9 && v <= kPi + 1e-9)) {
            throw DataError("feature outside [-pi, pi]");
        }
    }
}

Dataset subset(const Dataset& ds, std::size_t start, std::size_t count) {
    if (start + count > ds.n) throw DataError("subset out of range");
    Dataset out;
    out.name = ds.name;
    out.n = count;
    out.d = ds.d;
    out.x.assign(ds.x.begin() + start * ds.d, ds.x.begin() + (start + count) * ds.d);
    out.y.assign(ds.y.begin() + start, ds.y.begin() + start + count);
    out.norm = ds.norm;
    return out;
}

// --- generators ---------------------------------------------------------------

Dataset gen_linearly_separable(int d, std::size_t n, double margin, std::uint64_t seed) {
    if (d <= 0 || n < 2) throw ConfigError("gen_linearly_separable: need d >= 1 and n >= 2");
    if (margin < 0.0) throw ConfigError("margin must be >= 0");
    Rng rng(derive_seed(seed, "linsep"));

    std::vector<double> w(static_cast<std::size_t>(d));
    double nw = 0.0;
    for (auto& wi : w) {
        wi = rng.gaussian();
        nw += wi * wi;
    }
    nw = std::sqrt(nw);
    for (auto& wi : w) wi /= nw;

    Dataset ds;
    ds.name = "linsep";
    ds.n = n;
    ds.d = static_cast<std::size_t>(d);
    ds.x.resize(n * ds.d);
    ds.y.resize(n);
    std::vector<double> point(ds.d);
    for (std::size_t i = 0; i < n; ++i) {
        double proj = 0.0;
        do {
            proj = 0.0;
            for (std::size_t j = 0; j < ds.d; ++j) {
                point[j] = rng.uniform(-kPi, kPi);
                proj += w[j] * point[j];
            }
        } while (std::abs(proj) < margin);
        std::copy(point.begin(), point.end(), ds.x.begin() + i * ds.d);
        ds.y[i] = proj >= 0.0 ? 1 : -1;
    }
    return ds;
}

namespace {

// min-max rescale every feature of the generated set to [-pi, pi]
void minmax_to_pi(Dataset& ds) {
    ds.norm = fit_normalization(ds.x, ds.n, ds.d);
    apply_normalization(ds.norm, ds.x, ds.n, ds.d, true);
}

}  // namespace

Dataset gen_two_curves(int d, std::size_t n, int curvature, double separation,
                       std::uint64_t seed) {
    if (d <= 0 || n < 2) throw ConfigError("gen_two_curves: need d >= 1 and n >= 2");
    if (curvature < 1) throw ConfigError("curvature must be >= 1");
    Rng rng(derive_seed(seed, "two-curves"));

    const std::size_t dim = static_cast<std::size_t>(d);
    // shared random curve: truncated Fourier series with decaying harmonics
    std::vector<double> coeff_cos(static_cast<std::size_t>(curvature) * dim);
    std::vector<double> coeff_sin(static_cast<std::size_t>(curvature) * dim);
    for (int h = 0; h < curvature; ++h) {
        const double scale = 1.0 / (h + 1.0);
        for (std::size_t j = 0; j < dim; ++j) {
            coeff_cos[static_cast<std::size_t>(h) * dim + j] = scale * rng.gaussian();
            coeff_sin[static_cast<std::size_t>(h) * dim + j] = scale * rng.gaussian();
        }
    }
    std::vector<double> u(dim);
    double nu = 0.0;
    for (auto& ui : u) {
        ui = rng.gaussian();
        nu += ui * ui;
    }
    nu = std::sqrt(nu);
    for (auto& ui : u) ui /= nu;

    Dataset ds;
    ds.name = "two-curves";
    ds.n = n;
    ds.d = dim;
    ds.x.resize(n * dim);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int8_t label = (i % 2 == 0) ? 1 : -1;
        const double t = rng.uniform();
        double* row = ds.x.data() + i * dim;
        std::fill(row, row + dim, 0.0);
        for (int h = 0; h < curvature; ++h) {
            const double ang = 2.0 * kPi * (h + 1.0) * t;
            const double ch = std::cos(ang);
            const double sh = std::sin(ang);
            const double* ac = coeff_cos.data() + static_cast<std::size_t>(h) * dim;
            const double* as = coeff_sin.data() + static_cast<std::size_t>(h) * dim;
            for (std::size_t j = 0; j < dim; ++j) row[j] += ac[j] * ch + as[j] * sh;
        }
        const double off = 0.5 * separation * label;
        for (std::size_t j = 0; j < dim; ++j) row[j] += off * u[j];
        ds.y[i] = label;
    }
    minmax_to_pi(ds);
    return ds;
}

Dataset gen_bars_stripes(std::size_t n, double noise_sigma, std::uint64_t seed) {
    if (n < 2) throw ConfigError("gen_bars_stripes: need n >= 2");
    Rng rng(derive_seed(seed, "bars-stripes"));

    Dataset ds;
    ds.name = "bars-stripes";
    ds.n = n;
    ds.d = 16;
    ds.x.resize(n * 16);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool stripes = (i % 2 == 1);  // bars first: label -1
        // 4-bit pattern, all-equal images excluded
        const unsigned bits = 1 + static_cast<unsigned>(rng.below(14));
        double* img = ds.x.data() + i * 16;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                const int line = stripes ? c : r;
                img[r * 4 + c] = ((bits >> line) & 1u) ? 1.0 : 0.0;
            }
        }
        if (noise_sigma > 0.0) {
            for (int p = 0; p < 16; ++p) img[p] += noise_sigma * rng.gaussian();
        }
        ds.y[i] = stripes ? 1 : -1;
    }
    minmax_to_pi(ds);
    return ds;
}

// --- IDX ------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw DataError("truncated IDX file: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000803u) throw DataError("bad image magic in " + path);
    IdxImages out;
    out.count = read_be32(in, path);
    out.rows = static_cast<int>(read_be32(in, path));
    out.cols = static_cast<int>(read_be32(in, path));
    const std::size_t total = out.count * static_cast<std::size_t>(out.rows) *
                              static_cast<std::size_t>(out.cols);
    out.pixels.resize(total);
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(total));
    if (!in) throw DataError("truncated IDX file: " + path);
    return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000801u) throw DataError("bad label magic in " + path);
    const std::uint32_t count = read_be32(in, path);
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
    if (!in) throw DataError("truncated IDX file: " + path);
    return labels;
}

std::vector<double> pool_downsample(std::span<const double> image, int side, int factor) {
    if (factor <= 0 || side % factor != 0) throw ConfigError("pooling factor must divide the image side");
    if (image.size() != static_cast<std::size_t>(side) * static_cast<std::size_t>(side)) {
        throw ConfigError("image size does not match side");
    }
    const int out_side = side / factor;
    std::vector<double> out(static_cast<std::size_t>(out_side) * out_side);
    const double inv = 1.0 / (factor * factor);
    for (int r = 0; r < out_side; ++r) {
        for (int c = 0; c < out_side; ++c) {
            double acc = 0.0;
            for (int dr = 0; dr < factor; ++dr) {
                for (int dc = 0; dc < factor; ++dc) {
                    acc += image[static_cast<std::size_t>(r * factor + dr) * side +
                                 (c * factor + dc)];
                }
            }
            out[static_cast<std::size_t>(r) * out_side + c] = acc * inv;
        }
    }
    return out;
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::pair<int, int> digits, const NormalizationRecord* train_norm,
                       int pool_factor, std::size_t max_n) {
    const IdxImages imgs = read_idx_images(images_path);
    const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
    if (labels.size() != imgs.count) {
        throw DataError("image/label count mismatch: " + std::to_string(imgs.count) + " vs " +
                        std::to_string(labels.size()));
    }
    if (imgs.rows != imgs.cols) throw DataError("non-square images unsupported");
    const int side = imgs.rows;
    if (pool_factor < 1 || side % pool_factor != 0) {
        throw ConfigError("pooling factor must divide the image side");
    }
    const int out_side = side / pool_factor;

    Dataset ds;
    ds.name = "mnist" + std::to_string(digits.first) + std::to_string(digits.second);
    ds.d = static_cast<std::size_t>(out_side) * out_side;

    const std::size_t px = static_cast<std::size_t>(side) * side;
    std::vector<double> raw(px);
    for (std::size_t i = 0; i < imgs.count; ++i) {
        const int digit = labels[i];
        if (digit != digits.first && digit != digits.second) continue;
        for (std::size_t p = 0; p < px; ++p) {
            raw[p] = static_cast<double>(imgs.pixels[i * px + p]);
        }
        if (pool_factor > 1) {
            const std::vector<double> pooled = pool_downsample(raw, side, pool_factor);
            ds.x.insert(ds.x.end(), pooled.begin(), pooled.end());
        } else {
            ds.x.insert(ds.x.end(), raw.begin(), raw.end());
        }
        ds.y.push_back(digit == digits.first ? -1 : 1);
        ++ds.n;
        if (max_n > 0 && ds.n == max_n) break;
    }
    if (ds.n == 0) throw DataError("no samples found for the requested digits");

    if (train_norm != nullptr) {
        if (train_norm->scale.size() != ds.d) throw DataError("normalization record dimension mismatch");
        ds.norm = *train_norm;
        apply_normalization(ds.norm, ds.x, ds.n, ds.d, true);
    } else {
        ds.norm = fit_normalization(ds.x, ds.n, ds.d);
        apply_normalization(ds.norm, ds.x, ds.n, ds.d, true);
    }
    return ds;
}

// --- PCA ------------------------------------------------------------------------

EigenDecomposition jacobi_eigensolve(std::vector<double> a, std::size_t n) {
    if (a.size() != n * n) throw ConfigError("matrix shape mismatch");
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i * n + i]));
    scale = std::max(scale, 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        }
        if (off < 1e-26 * scale * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(tau * tau + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return a[l * n + l] < a[r * n + r]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = a[order[i] * n + order[i]];
        for (std::size_t k = 0; k < n; ++k) out.vectors[i * n + k] = v[k * n + order[i]];
    }
    return out;
}

PcaTransform pca_fit(std::span<const double> x, std::size_t n, std::size_t d, int r) {
    if (r < 1 || static_cast<std::size_t>(r) > d) throw ConfigError("invalid component count");
    if (n <= static_cast<std::size_t>(r)) throw ConfigError("need more samples than components");
    PcaTransform t;
    t.d = static_cast<int>(d);
    t.r = r;
    t.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) t.mean[j] += x[i * d + j];
    }
    for (auto& m : t.mean) m /= static_cast<double>(n);

    std::vector<double> cov(d * d, 0.0);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered[j] = x[i * d + j] - t.mean[j];
        for (std::size_t j = 0; j < d; ++j) {
            const double cj = centered[j];
            double* row = cov.data() + j * d;
            for (std::size_t k = j; k < d; ++k) row[k] += cj * centered[k];
        }
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            cov[j * d + k] *= inv;
            cov[k * d + j] = cov[j * d + k];
        }
    }

    const EigenDecomposition eig = jacobi_eigensolve(std::move(cov), d);
    t.components.resize(static_cast<std::size_t>(r) * d);
    t.eigenvalues.resize(static_cast<std::size_t>(r));
    const double lambda_max = std::max(std::abs(eig.values.back()), 1e-300);
    for (int c = 0; c < r; ++c) {
        const std::size_t src = d - 1 - static_cast<std::size_t>(c);  // descending
        t.eigenvalues[static_cast<std::size_t>(c)] = eig.values[src];
        double* dst = t.components.data() + static_cast<std::size_t>(c) * d;
        std::copy(eig.vectors.begin() + src * d, eig.vectors.begin() + (src + 1) * d, dst);
        // deterministic sign: largest-magnitude entry positive
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j) {
            if (std::abs(dst[j]) > std::abs(dst[arg])) arg = j;
        }
        if (dst[arg] < 0.0) {
            for (std::size_t j = 0; j < d; ++j) dst[j] = -dst[j];
        }
        if (t.eigenvalues[static_cast<std::size_t>(c)] < 1e-10 * lambda_max) {
            t.rank_deficient = true;
        }
    }
    return t;
}

std::vector<double> pca_apply(const PcaTransform& t, std::span<const double> x, std::size_t n) {
    const std::size_t d = static_cast<std::size_t>(t.d);
    const std::size_t r = static_cast<std::size_t>(t.r);
    if (x.size() != n * d) throw ConfigError("pca_apply shape mismatch");
    std::vector<double> out(n * r, 0.0);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered[j] = x[i * d + j] - t.mean[j];
        for (std::size_t c = 0; c < r; ++c) {
            const double* comp = t.components.data() + c * d;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += comp[j] * centered[j];
            out[i * r + c] = acc;
        }
    }
    return out;
}

// --- normalization ----------------------------------------------------------------

NormalizationRecord fit_normalization(std::span<const double> x, std::size_t n, std::size_t d) {
    if (n == 0) throw DataError("cannot fit normalization on an empty set");
    NormalizationRecord rec;
    rec.scale.assign(d, 0.0);
    rec.offset.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = x[j];
        double hi = x[j];
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, x[i * d + j]);
            hi = std::max(hi, x[i * d + j]);
        }
        if (hi > lo) {
            rec.scale[j] = 2.0 * kPi / (hi - lo);
            rec.offset[j] = -kPi - rec.scale[j] * lo;
        }
        // constant features keep scale 0 / offset 0 and map to 0
    }
    return rec;
}

void apply_normalization(const NormalizationRecord& rec, std::span<double> x,
                         std::size_t n, std::size_t d, bool clip) {
    if (rec.scale.size() != d) throw DataError("normalization record dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double v = rec.scale[j] * x[i * d + j] + rec.offset[j];
            if (clip) v = std::clamp(v, -kPi, kPi);
            x[i * d + j] = v;
        }
    }
}

void normalize_features(Dataset& train, Dataset& other) {
    if (train.d != other.d) throw DataError("train/test dimension mismatch");
    const NormalizationRecord rec = fit_normalization(train.x, train.n, train.d);
    apply_normalization(rec, train.x, train.n, train.d, true);
    apply_normalization(rec, other.x, other.n, other.d, true);
    train.norm = rec;
    other.norm = rec;
}

// --- CSV ---------------------------------------------------------------------------

void write_dataset_csv(const std::string& path, const Dataset& ds) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    for (std::size_t j = 0; j < ds.d; ++j) std::fprintf(f, "f%zu,", j);
    std::fprintf(f, "label\n");
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.d; ++j) {
            std::fprintf(f, "%.17g,", ds.x[i * ds.d + j]);
        }
        std::fprintf(f, "%d\n", static_cast<int>(ds.y[i]));
    }
    std::fclose(f);
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);

    // header: f0,...,f{d-1},label
    std::size_t d = 0;
    {
        std::stringstream ss(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.empty() || cols.back() != "label") {
            throw DataError("bad dataset header in " + path);
        }
        d = cols.size() - 1;
        for (std::size_t j = 0; j < d; ++j) {
            if (cols[j] != "f" + std::to_string(j)) throw DataError("bad dataset header in " + path);
        }
    }

    Dataset ds;
    ds.name = path;
    ds.d = d;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* end = nullptr;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = std::strtod(p, &end);
            if (end == p || *end != ',') throw DataError("bad row in " + path);
            ds.x.push_back(v);
            p = end + 1;
        }
        const long lab = std::strtol(p, &end, 10);
        if (end == p || (lab != 1 && lab != -1)) throw DataError("bad label in " + path);
        ds.y.push_back(static_cast<std::int8_t>(lab));
        ++ds.n;
    }
    if (ds.n == 0) throw DataError("no rows in " + path);
    return ds;
}

}  // namespace qflair
