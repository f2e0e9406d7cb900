#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace bllab::fft {

namespace detail {

// One cached in-place plan per (size, direction). FFTW plan creation is not
// thread-safe, execution on the cached buffer is serialized by the same lock.
struct PlanSlot {
    fftw_complex* buf = nullptr;
    fftw_plan plan = nullptr;
    ~PlanSlot() {
        if (plan) fftw_destroy_plan(plan);
        if (buf) fftw_free(buf);
    }
};

inline std::mutex& lock() {
    static std::mutex m;
    return m;
}

inline PlanSlot& slot(int n, int sign) {
    static std::map<std::pair<int, int>, PlanSlot> cache;
    auto& s = cache[{n, sign}];
    if (!s.plan) {
        s.buf = fftw_alloc_complex(n);
        s.plan = fftw_plan_dft_1d(n, s.buf, s.buf, sign, FFTW_ESTIMATE);
    }
    return s;
}

inline void execute(std::complex<double>* data, int n, int sign) {
    std::lock_guard<std::mutex> g(lock());
    auto& s = slot(n, sign);
    std::memcpy(s.buf, data, sizeof(fftw_complex) * n);
    fftw_execute(s.plan);
    std::memcpy(data, s.buf, sizeof(fftw_complex) * n);
}

} // namespace detail

// Coefficient convention: c_j = (1/n) sum_k f_k e^{-2 pi i j k / n}, so that
// f_k = sum_j c_j e^{+2 pi i j k / n}.
inline void to_coeff(std::complex<double>* data, int n) {
    detail::execute(data, n, FFTW_FORWARD);
    const double inv = 1.0 / n;
    for (int i = 0; i < n; ++i) data[i] *= inv;
}

inline void to_values(std::complex<double>* data, int n) {
    detail::execute(data, n, FFTW_BACKWARD);
}

} // namespace bllab::fft
