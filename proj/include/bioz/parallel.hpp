#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace bioz {

enum class Exec { Serial, Parallel };

// Runs f(i) for i in [0, n). The parallel path uses OpenMP; the first exception
// thrown by any iteration is rethrown on the calling thread after the loop.
template <class F>
void for_each_index(std::size_t n, F&& f, Exec exec = Exec::Parallel) {
    if (exec == Exec::Serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < count; ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace bioz
