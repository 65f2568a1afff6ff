#pragma once
// Data-parallel inner-loop kernels with runtime backend selection.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and
// NEON (aarch64) variants are compiled when the target allows and picked at
// first use according to the CPU. Set UOD_SIMD=scalar|avx2|neon in the
// environment to force a backend.
//
// Float inputs are widened to double before accumulation, so all kernels
// return double-precision results. Backends differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace uod::simd {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b) noexcept;

bool backend_supported(Backend b) noexcept;

Backend active_backend() noexcept;

// Throws std::invalid_argument if the backend is not supported on this CPU.
void set_backend(Backend b);

// Sizes of the two operands must match; only the first size is used.
double dot(std::span<const float> a, std::span<const float> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

// Raw kernel table. Exposed for equivalence tests between backends.
struct KernelTable {
    double (*dot_f32)(const float*, const float*, std::size_t) noexcept;
    double (*dot_f64)(const double*, const double*, std::size_t) noexcept;
    double (*sqdist_f64)(const double*, const double*, std::size_t) noexcept;
    void (*axpy_f64)(double, const double*, double*, std::size_t) noexcept;
};

// Returns nullptr if the backend was not compiled in.
const KernelTable* kernel_table(Backend b) noexcept;

}  // namespace uod::simd
