#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "abo/simd.hpp"

namespace abo::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("ABO_SIMD"); env != nullptr && *env != '\0') {
        const Backend requested = parse_backend(env);
        if (!backend_supported(requested)) {
            throw std::invalid_argument(std::string("ABO_SIMD backend not supported on this machine: ") + env);
        }
        return &kernels_for(requested);
    }
    if (backend_supported(Backend::avx2)) return avx2_kernels();
    if (backend_supported(Backend::neon)) return neon_kernels();
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& table_slot() {
    static std::atomic<const KernelTable*> slot{initial_table()};
    return slot;
}

}  // namespace

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
            return avx2_kernels() != nullptr && cpu_has_avx2();
        case Backend::neon:
            // Advanced SIMD is mandatory on AArch64.
            return neon_kernels() != nullptr;
    }
    return false;
}

const KernelTable& kernels_for(Backend b) {
    if (!backend_supported(b)) {
        throw std::invalid_argument("SIMD backend not supported: " + std::string(backend_name(b)));
    }
    switch (b) {
        case Backend::avx2:
            return *avx2_kernels();
        case Backend::neon:
            return *neon_kernels();
        case Backend::scalar:
            break;
    }
    return scalar_kernels();
}

const KernelTable& active() { return *table_slot().load(std::memory_order_relaxed); }

Backend active_backend() { return active().backend; }

void force_backend(Backend b) { table_slot().store(&kernels_for(b), std::memory_order_relaxed); }

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar:
            return "scalar";
        case Backend::avx2:
            return "avx2";
        case Backend::neon:
            return "neon";
    }
    return "unknown";
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "neon") return Backend::neon;
    throw std::invalid_argument("unknown SIMD backend: " + std::string(name));
}

}  // namespace abo::simd
