#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlceqa {

/// Calls fn(i) for i in [0, count) on up to `jobs` threads. Work items must be
/// independent; the first exception thrown is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn &&fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if(workers == 1 || count < 2) {
        for(std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for(std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch(...) {
                std::lock_guard lock(error_mutex);
                if(!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for(std::size_t t = 0; t < std::min(workers, count); ++t) pool.emplace_back(work);
    for(auto &t : pool) t.join();
    if(error) std::rethrow_exception(error);
}

} // namespace nlceqa
