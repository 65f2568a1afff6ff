#pragma once
// Patch affinity graph and its normalized-cut eigenbasis.

#include "uod/feature_store.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace uod {

// Dense symmetric affinity matrix, row-major n x n.
struct AffinityGraph {
    std::size_t n_nodes = 0;
    std::vector<double> weights;

    double at(std::size_t i, std::size_t j) const noexcept { return weights[i * n_nodes + j]; }
    std::span<const double> row(std::size_t i) const noexcept { return {weights.data() + i * n_nodes, n_nodes}; }
};

struct AffinityOptions {
    double floor = 1e-5;
    // TokenCut-style edges: 1 where cosine > binarize_tau, floor elsewhere.
    bool binarize = false;
    double binarize_tau = 0.2;
};

// w_ij = max(cos(k_i, k_j), floor), w_ii = 1. Throws InvariantError naming
// the patch index for a zero-norm token.
AffinityGraph build_affinity(const PatchFeatureMap& fmap, const AffinityOptions& options = {});

// Same, over an explicit set of row vectors (n x dim, row-major).
AffinityGraph build_affinity(std::span<const float> tokens, std::size_t dim, const AffinityOptions& options = {});

struct EigenOptions {
    double tolerance = 1e-8;
    std::size_t dense_below = 400;   // use the dense solver when n_nodes < dense_below
    std::size_t max_iter_factor = 10;
    double residual_bound = 1e-6;    // accepted generalized residual, relative to |Dy|
    std::uint64_t seed = 0x5eed;     // Lanczos start vector
};

// Generalized eigenpairs (D - W) y = lambda D y, trivial pair removed.
struct EigenBasis {
    std::size_t n_nodes = 0;
    std::size_t n_vectors = 0;
    std::vector<double> vectors;      // n_nodes x n_vectors, row-major
    std::vector<double> eigenvalues;  // ascending

    double at(std::size_t node, std::size_t k) const noexcept { return vectors[node * n_vectors + k]; }
    std::vector<double> column(std::size_t k) const;
};

// Returns eigenvectors 2..n+1 of the generalized problem, each with
// y^T D y = 1 and its largest-magnitude entry positive.
// Throws std::invalid_argument unless 2 <= n < n_nodes, and EigenSolverError
// if a returned pair misses the residual bound.
EigenBasis eigendecompose(const AffinityGraph& graph, std::size_t n, const EigenOptions& options = {});

// |(D - W) y - lambda D y|_2 / |D y|_2 for column k of the basis.
double generalized_residual(const AffinityGraph& graph, const EigenBasis& basis, std::size_t k);

struct PixelFeatureSpace {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t n_dims = 0;
    std::vector<double> features;  // (row, col, dim)

    std::size_t n_cells() const noexcept { return height * width; }
    std::span<const double> cell(std::size_t i) const noexcept { return {features.data() + i * n_dims, n_dims}; }
};

// Reshapes each eigenvector onto the patch grid and bilinearly upsamples it by
// an integer factor. Output cell (r, c) samples source position
// (r / factor, c / factor), clamped to the last row/column.
PixelFeatureSpace build_feature_space(const EigenBasis& basis, std::size_t h_patches, std::size_t w_patches,
                                      std::size_t upsample = 1);

}  // namespace uod
