#include "kernels_internal.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace uod::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if UOD_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() noexcept {
    if (const char* env = std::getenv("UOD_SIMD")) {
        const std::string_view want{env};
        if (want == "scalar") return Backend::scalar;
        if (want == "avx2" && backend_supported(Backend::avx2)) return Backend::avx2;
        if (want == "neon" && backend_supported(Backend::neon)) return Backend::neon;
    }
    if (backend_supported(Backend::avx2)) return Backend::avx2;
    if (backend_supported(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

struct State {
    std::atomic<Backend> backend;
    std::atomic<const KernelTable*> table;
    State() {
        const Backend b = detect();
        backend.store(b);
        table.store(kernel_table(b));
    }
};

State& state() noexcept {
    static State s;
    return s;
}

inline const KernelTable& active() noexcept { return *state().table.load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_supported(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return cpu_has_avx2();
        case Backend::neon:
#if UOD_HAVE_NEON
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* kernel_table(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return &detail::scalar_table();
        case Backend::avx2:
#if UOD_HAVE_AVX2
            return &detail::avx2_table();
#else
            return nullptr;
#endif
        case Backend::neon:
#if UOD_HAVE_NEON
            return &detail::neon_table();
#else
            return nullptr;
#endif
    }
    return nullptr;
}

Backend active_backend() noexcept { return state().backend.load(); }

void set_backend(Backend b) {
    if (!backend_supported(b)) {
        throw std::invalid_argument("SIMD backend not supported on this CPU: " + std::string(backend_name(b)));
    }
    state().table.store(kernel_table(b));
    state().backend.store(b);
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
    return active().dot_f32(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot_f64(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return active().sqdist_f64(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

}  // namespace uod::simd
