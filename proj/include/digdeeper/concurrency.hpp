#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>

namespace digdeeper {

/// Counting limiter on in-flight backend requests.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::size_t max_in_flight = 4);

    void set_max(std::size_t max_in_flight);
    std::size_t max() const;
    void acquire();
    void release();

    class Permit {
    public:
        explicit Permit(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
        ~Permit() { limiter_.release(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        ConcurrencyLimiter& limiter_;
    };

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t max_;
    std::size_t in_flight_ = 0;
};

/// Process-wide limiter shared by every chat and embedding backend.
ConcurrencyLimiter& backend_limiter();

/// Runs fn(0..count-1) on up to `parallelism` threads. Callers write results into
/// pre-sized slots, so output order never depends on scheduling. The first exception
/// thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn);

}  // namespace digdeeper
