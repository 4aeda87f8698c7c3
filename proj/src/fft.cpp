#include "mrfno/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace mrfno::fft {

namespace {

// FFTW planning is not thread-safe; execution through fftw_execute_dft is.
// Plans use FFTW_ESTIMATE so the chosen algorithm (and therefore rounding)
// is identical across runs.
std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

fftw_plan plan_for(int n0, int n1, int sign) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_tuple(n0, n1, sign);
    auto it = g_plans.find(key);
    if (it != g_plans.end()) return it->second;

    const int total = n1 > 0 ? n0 * n1 : n0;
    fftw_complex* scratch = fftw_alloc_complex(static_cast<size_t>(total));
    fftw_plan p;
    if (n1 > 0) {
        p = fftw_plan_dft_2d(n0, n1, scratch, scratch, sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    } else {
        p = fftw_plan_dft_1d(n0, scratch, scratch, sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_free(scratch);
    g_plans.emplace(key, p);
    return p;
}

} // namespace

void transform(const std::complex<double>* in, std::complex<double>* out,
               int n0, int n1, int sign) {
    fftw_plan p = plan_for(n0, n1, sign);
    fftw_execute_dft(p,
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void transform_many(std::complex<double>* data, int n0, int n1, int count, int sign) {
    const int total = n1 > 0 ? n0 * n1 : n0;
    fftw_plan p = plan_for(n0, n1, sign);
    for (int k = 0; k < count; ++k) {
        auto* ptr = reinterpret_cast<fftw_complex*>(data + static_cast<long>(k) * total);
        fftw_execute_dft(p, ptr, ptr);
    }
}

} // namespace mrfno::fft
