#pragma once

// Dense double-precision inner-loop kernels.
//
// Every kernel has a portable scalar reference implementation and, where the
// target supports it, a vectorized variant (AVX2+FMA on x86-64, NEON on
// AArch64). The active table is chosen once at startup from CPUID and can be
// overridden with the ABO_SIMD environment variable ("scalar", "avx2", "neon")
// or programmatically via force_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace abo::simd {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum_i x[i]^2
    double (*sumsq)(const double* x, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x *= alpha
    void (*scale)(double alpha, double* x, std::size_t n);
    // (x, y) <- (c x + s y, c y - s x)
    void (*rot)(double* x, double* y, std::size_t n, double c, double s);
};

const KernelTable& scalar_kernels();
// Null when the backend is not compiled into this binary.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

bool backend_supported(Backend b);
const KernelTable& kernels_for(Backend b);

// Table used by every span helper below.
const KernelTable& active();
Backend active_backend();
// Throws std::invalid_argument when b is not supported on this machine.
void force_backend(Backend b);

std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double sumsq(std::span<const double> x) { return active().sumsq(x.data(), x.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }
inline void rot(std::span<double> x, std::span<double> y, double c, double s) {
    active().rot(x.data(), y.data(), x.size(), c, s);
}

// RAII override of the active backend, restored on scope exit.
class ScopedBackend {
  public:
    explicit ScopedBackend(Backend b) : previous_(active_backend()) { force_backend(b); }
    ~ScopedBackend() { force_backend(previous_); }
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

  private:
    Backend previous_;
};

}  // namespace abo::simd
