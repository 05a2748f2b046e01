#include "digdeeper/concurrency.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace digdeeper {

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t max_in_flight)
    : max_(std::max<std::size_t>(1, max_in_flight)) {}

void ConcurrencyLimiter::set_max(std::size_t max_in_flight) {
    {
        std::lock_guard lock(mutex_);
        max_ = std::max<std::size_t>(1, max_in_flight);
    }
    cv_.notify_all();
}

std::size_t ConcurrencyLimiter::max() const {
    std::lock_guard lock(mutex_);
    return max_;
}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < max_; });
    ++in_flight_;
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

ConcurrencyLimiter& backend_limiter() {
    static ConcurrencyLimiter limiter(4);
    return limiter;
}

void parallel_for(std::size_t count, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(count, std::max<std::size_t>(1, parallelism));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace digdeeper
