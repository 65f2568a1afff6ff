#include "uod/spectral_graph.hpp"

#include "uod/error.hpp"
#include "uod/simd/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace uod {

AffinityGraph build_affinity(std::span<const float> tokens, std::size_t dim, const AffinityOptions& options) {
    if (dim == 0 || tokens.size() % dim != 0) throw std::invalid_argument("token buffer is not a multiple of dim");
    if (!(options.floor >= 0.0) || options.floor > 1.0) throw std::invalid_argument("affinity floor must lie in [0, 1]");
    const std::size_t n = tokens.size() / dim;
    auto token = [&](std::size_t i) { return tokens.subspan(i * dim, dim); };

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = std::sqrt(simd::dot(token(i), token(i)));
        if (norms[i] == 0.0) {
            throw InvariantError("patch[" + std::to_string(i) + "]", "zero-norm token vector");
        }
    }

    AffinityGraph g;
    g.n_nodes = n;
    g.weights.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        g.weights[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double cos = std::min(1.0, simd::dot(token(i), token(j)) / (norms[i] * norms[j]));
            double w;
            if (options.binarize) {
                w = cos > options.binarize_tau ? 1.0 : options.floor;
            } else {
                w = std::max(cos, options.floor);
            }
            g.weights[i * n + j] = w;
            g.weights[j * n + i] = w;
        }
    }
    return g;
}

AffinityGraph build_affinity(const PatchFeatureMap& fmap, const AffinityOptions& options) {
    validate(fmap);
    return build_affinity(fmap.values, fmap.dim, options);
}

std::vector<double> EigenBasis::column(std::size_t k) const {
    std::vector<double> col(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) col[i] = at(i, k);
    return col;
}

namespace {

std::vector<double> degrees_of(const AffinityGraph& g) {
    std::vector<double> d(g.n_nodes, 0.0);
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
        for (double w : g.row(i)) d[i] += w;
    }
    return d;
}

// Eigenpairs of the normalized operator S = D^-1/2 W D^-1/2, largest first.
struct RitzPairs {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
};

RitzPairs dense_top_pairs(const std::vector<double>& s, std::size_t n_nodes, std::size_t count) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sm(s.data(), n_nodes,
                                                                                              n_nodes);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sm);
    if (solver.info() != Eigen::Success) throw EigenSolverError("dense eigensolver failed", -1.0);
    RitzPairs out;
    for (std::size_t k = 0; k < count; ++k) {
        const auto idx = static_cast<Eigen::Index>(n_nodes - 1 - k);
        out.values.push_back(solver.eigenvalues()(idx));
        std::vector<double> v(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) v[i] = solver.eigenvectors()(static_cast<Eigen::Index>(i), idx);
        out.vectors.push_back(std::move(v));
    }
    return out;
}

class LanczosSolver {
public:
    LanczosSolver(const std::vector<double>& s, std::size_t n_nodes, const EigenOptions& opt)
        : s_(s), n_(n_nodes), opt_(opt), rng_(opt.seed) {}

    RitzPairs top_pairs(std::size_t count) {
        const std::size_t max_matvecs = std::max<std::size_t>(opt_.max_iter_factor * n_, n_);
        std::vector<double> q = random_orthogonal_unit();
        std::size_t block_start = 0;
        std::size_t matvecs = 0;
        std::vector<double> w(n_);

        while (true) {
            basis_.push_back(q);
            const std::size_t j = basis_.size() - 1;
            for (std::size_t i = 0; i < n_; ++i) w[i] = simd::dot(row(i), basis_[j]);
            ++matvecs;
            const double a = simd::dot(std::span<const double>(w), std::span<const double>(basis_[j]));
            alpha_.push_back(a);
            // Two passes of full reorthogonalization against every Lanczos vector.
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& b : basis_) simd::axpy(-simd::dot(std::span<const double>(b), std::span<const double>(w)), b, w);
            }
            double b = std::sqrt(simd::dot(std::span<const double>(w), std::span<const double>(w)));
            const std::size_t m = basis_.size();
            const bool breakdown = b <= 1e-10;
            const bool full = m == n_;
            const bool exhausted = matvecs >= max_matvecs;

            if (m >= count && (full || exhausted || breakdown || (m - block_start) % 5 == 0)) {
                auto result = ritz(count, breakdown || full ? 0.0 : b);
                bool ok = result.converged;
                if (breakdown) {
                    // An invariant subspace hides repeated eigenvalues: only
                    // stop once a restarted block adds nothing to the top set.
                    ok = ok && block_start > 0 &&
                         block_leading(block_start, 0.0).value <= result.pairs.values.back() + opt_.tolerance;
                } else if (block_start > 0) {
                    ok = ok && block_leading(block_start, b).residual <= opt_.tolerance;
                }
                if (ok || full || exhausted) return std::move(result.pairs);
            }
            if (full || exhausted) {
                throw EigenSolverError("Lanczos iteration exhausted before collecting enough Ritz pairs", b);
            }
            if (breakdown) {
                beta_.push_back(0.0);
                block_start = m;
                q = random_orthogonal_unit();
            } else {
                beta_.push_back(b);
                for (std::size_t i = 0; i < n_; ++i) q[i] = w[i] / b;
            }
        }
    }

private:
    struct RitzResult {
        RitzPairs pairs;
        bool converged = false;
    };

    std::span<const double> row(std::size_t i) const { return {s_.data() + i * n_, n_}; }

    std::vector<double> random_orthogonal_unit() {
        std::vector<double> v(n_);
        for (int attempt = 0; attempt < 8; ++attempt) {
            for (double& x : v) x = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& b : basis_) simd::axpy(-simd::dot(std::span<const double>(b), std::span<const double>(v)), b, v);
            }
            const double norm = std::sqrt(simd::dot(std::span<const double>(v), std::span<const double>(v)));
            if (norm > 1e-8) {
                for (double& x : v) x /= norm;
                return v;
            }
        }
        throw EigenSolverError("could not extend Lanczos basis", -1.0);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tridiagonal(std::size_t from) const {
        const auto m = static_cast<Eigen::Index>(basis_.size() - from);
        Eigen::VectorXd diag(m);
        Eigen::VectorXd sub(std::max<Eigen::Index>(m - 1, 0));
        for (Eigen::Index i = 0; i < m; ++i) diag(i) = alpha_[from + static_cast<std::size_t>(i)];
        for (Eigen::Index i = 0; i + 1 < m; ++i) sub(i) = beta_[from + static_cast<std::size_t>(i)];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        if (tri.info() != Eigen::Success) throw EigenSolverError("tridiagonal eigensolver failed", -1.0);
        return tri;
    }

    // Ritz pairs of the current tridiagonal matrix. `last_beta` is the
    // coupling to the next (not yet built) Lanczos vector.
    RitzResult ritz(std::size_t count, double last_beta) const {
        const auto tri = tridiagonal(0);
        const auto m = static_cast<Eigen::Index>(basis_.size());
        RitzResult out;
        out.converged = true;
        for (std::size_t k = 0; k < count; ++k) {
            const Eigen::Index idx = m - 1 - static_cast<Eigen::Index>(k);
            const double resid = std::abs(last_beta * tri.eigenvectors()(m - 1, idx));
            if (resid > opt_.tolerance) out.converged = false;
            out.pairs.values.push_back(tri.eigenvalues()(idx));
            std::vector<double> v(n_, 0.0);
            for (Eigen::Index i = 0; i < m; ++i) {
                simd::axpy(tri.eigenvectors()(i, idx), basis_[static_cast<std::size_t>(i)], v);
            }
            out.pairs.vectors.push_back(std::move(v));
        }
        return out;
    }

    struct Leading {
        double value;
        double residual;
    };

    // Largest Ritz value of the block that starts at `from`.
    Leading block_leading(std::size_t from, double last_beta) const {
        const auto tri = tridiagonal(from);
        const Eigen::Index m = tri.eigenvalues().size();
        return {tri.eigenvalues()(m - 1), std::abs(last_beta * tri.eigenvectors()(m - 1, m - 1))};
    }

    const std::vector<double>& s_;
    std::size_t n_;
    EigenOptions opt_;
    std::mt19937_64 rng_;
    std::vector<std::vector<double>> basis_;
    std::vector<double> alpha_;
    std::vector<double> beta_;
};

}  // namespace

double generalized_residual(const AffinityGraph& graph, const EigenBasis& basis, std::size_t k) {
    const std::size_t n = graph.n_nodes;
    const auto d = degrees_of(graph);
    const auto y = basis.column(k);
    const double lambda = basis.eigenvalues[k];
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wy = simd::dot(graph.row(i), std::span<const double>(y));
        const double r = d[i] * y[i] - wy - lambda * d[i] * y[i];
        num += r * r;
        den += d[i] * y[i] * d[i] * y[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

EigenBasis eigendecompose(const AffinityGraph& graph, std::size_t n, const EigenOptions& options) {
    const std::size_t nodes = graph.n_nodes;
    if (n < 2) throw std::invalid_argument("eigendecompose: need at least 2 eigenvectors");
    if (n >= nodes) throw std::invalid_argument("eigendecompose: n must be smaller than the node count");

    const auto d = degrees_of(graph);
    std::vector<double> inv_sqrt_d(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        if (!(d[i] > 0.0)) throw InvariantError("degree[" + std::to_string(i) + "]", "non-positive node degree");
        inv_sqrt_d[i] = 1.0 / std::sqrt(d[i]);
    }
    // S = D^-1/2 W D^-1/2 has the trivial eigenvector D^1/2 1 with eigenvalue 1.
    // Shifting it to -2 (below the spectrum of S) leaves the nontrivial pairs on
    // top, also when eigenvalue 1 is repeated (disconnected graphs).
    double total = 0.0;
    for (double v : d) total += v;
    std::vector<double> u(nodes);
    for (std::size_t i = 0; i < nodes; ++i) u[i] = std::sqrt(d[i] / total);
    std::vector<double> s(nodes * nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = 0; j < nodes; ++j) {
            s[i * nodes + j] = graph.weights[i * nodes + j] * inv_sqrt_d[i] * inv_sqrt_d[j] - 3.0 * u[i] * u[j];
        }
    }

    RitzPairs pairs;
    if (nodes < options.dense_below) {
        pairs = dense_top_pairs(s, nodes, n);
    } else {
        LanczosSolver solver(s, nodes, options);
        pairs = solver.top_pairs(n);
        if (pairs.values.size() < n) throw EigenSolverError("Lanczos returned too few Ritz pairs", -1.0);
    }

    EigenBasis basis;
    basis.n_nodes = nodes;
    basis.n_vectors = n;
    basis.vectors.assign(nodes * n, 0.0);
    basis.eigenvalues.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // Largest S-eigenvalue first == smallest generalized eigenvalue first.
        const auto& v = pairs.vectors[k];
        basis.eigenvalues[k] = 1.0 - pairs.values[k];
        std::vector<double> y(nodes);
        double dnorm = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) {
            y[i] = v[i] * inv_sqrt_d[i];
            dnorm += d[i] * y[i] * y[i];
        }
        dnorm = std::sqrt(dnorm);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < nodes; ++i) {
            if (std::abs(y[i]) > std::abs(y[arg])) arg = i;
        }
        const double sign = y[arg] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < nodes; ++i) basis.vectors[i * n + k] = sign * y[i] / dnorm;
    }

    for (std::size_t k = 0; k < n; ++k) {
        const double r = generalized_residual(graph, basis, k);
        if (!(r <= options.residual_bound)) {
            throw EigenSolverError("eigenpair " + std::to_string(k) + " missed the residual bound", r);
        }
    }
    return basis;
}

PixelFeatureSpace build_feature_space(const EigenBasis& basis, std::size_t h_patches, std::size_t w_patches,
                                      std::size_t upsample) {
    if (basis.n_nodes != h_patches * w_patches) {
        throw std::invalid_argument("build_feature_space: basis rows do not match the patch grid");
    }
    if (upsample == 0) throw std::invalid_argument("build_feature_space: upsample factor must be >= 1");
    PixelFeatureSpace space;
    space.height = h_patches * upsample;
    space.width = w_patches * upsample;
    space.n_dims = basis.n_vectors;
    space.features.resize(space.height * space.width * space.n_dims);

    const double f = static_cast<double>(upsample);
    for (std::size_t r = 0; r < space.height; ++r) {
        const double sr = std::min(static_cast<double>(r) / f, static_cast<double>(h_patches - 1));
        const auto r0 = static_cast<std::size_t>(sr);
        const std::size_t r1 = std::min(r0 + 1, h_patches - 1);
        const double fr = sr - static_cast<double>(r0);
        for (std::size_t c = 0; c < space.width; ++c) {
            const double sc = std::min(static_cast<double>(c) / f, static_cast<double>(w_patches - 1));
            const auto c0 = static_cast<std::size_t>(sc);
            const std::size_t c1 = std::min(c0 + 1, w_patches - 1);
            const double fc = sc - static_cast<double>(c0);
            double* out = space.features.data() + (r * space.width + c) * space.n_dims;
            for (std::size_t k = 0; k < space.n_dims; ++k) {
                const double v00 = basis.at(r0 * w_patches + c0, k);
                const double v01 = basis.at(r0 * w_patches + c1, k);
                const double v10 = basis.at(r1 * w_patches + c0, k);
                const double v11 = basis.at(r1 * w_patches + c1, k);
                out[k] = (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11);
            }
        }
    }
    return space;
}

}  // namespace uod
