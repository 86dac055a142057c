#include "hydropinn/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace hydropinn {

namespace {

std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan>& plan_cache() {
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    return cache;
}

fftw_plan get_plan(int rows, int cols, int sign) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_tuple(rows, cols, sign);
    auto& cache = plan_cache();
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // Plan on a scratch buffer; FFTW_UNALIGNED lets the plan execute on any
    // caller buffer via the new-array interface.
    fftw_complex* scratch = fftw_alloc_complex(
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    fftw_plan plan = fftw_plan_dft_2d(rows, cols, scratch, scratch, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    cache.emplace(key, plan);
    return plan;
}

}  // namespace

void fft2(std::complex<double>* data, int rows, int cols, bool inverse) {
    fftw_plan plan = get_plan(rows, cols, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    auto* raw = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, raw, raw);
}

}  // namespace hydropinn
