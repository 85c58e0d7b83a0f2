#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fiberot {

// Process-wide default worker count. 1 keeps everything on the calling thread;
// the CLI raises it from --threads / FIBEROT_THREADS.
inline std::atomic<int>& max_threads_ref() {
    static std::atomic<int> value{1};
    return value;
}

inline void set_max_threads(int n) { max_threads_ref().store(n < 1 ? 1 : n); }
inline int max_threads() { return max_threads_ref().load(); }

namespace detail {

// Persistent pool. Jobs are index ranges pulled in chunks off an atomic
// counter; the submitting thread works too, so `threads` is the total
// parallelism, not the number of helpers.
class WorkerPool {
  public:
    static WorkerPool& instance() {
        static WorkerPool pool;
        return pool;
    }

    void run(std::size_t n, const std::function<void(std::size_t)>& fn, int threads) {
        std::unique_lock<std::mutex> gate(run_mutex_); // one parallel region at a time
        ensure_workers(threads - 1);
        {
            std::lock_guard<std::mutex> lk(mutex_);
            job_fn_ = &fn;
            job_size_ = n;
            next_.store(0);
            chunk_ = n / (static_cast<std::size_t>(threads) * 8) + 1;
            participants_ = threads - 1;
            active_ = threads - 1;
            ++generation_;
        }
        cv_.notify_all();
        work();
        std::unique_lock<std::mutex> lk(mutex_);
        done_cv_.wait(lk, [&] { return active_ == 0; });
        job_fn_ = nullptr;
    }

  private:
    WorkerPool() = default;

    ~WorkerPool() {
        {
            std::lock_guard<std::mutex> lk(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    void ensure_workers(int wanted) {
        std::lock_guard<std::mutex> lk(mutex_);
        while (static_cast<int>(workers_.size()) < wanted) {
            const std::size_t id = workers_.size();
            workers_.emplace_back([this, id] { worker_loop(id); });
        }
    }

    void worker_loop(std::size_t id) {
        std::uint64_t seen = 0;
        for (;;) {
            std::unique_lock<std::mutex> lk(mutex_);
            cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            // membership is checked against the fixed participant count, not
            // the countdown, or late wakers would skip their decrement
            if (id >= static_cast<std::size_t>(participants_)) continue;
            lk.unlock();
            work();
            lk.lock();
            if (--active_ == 0) done_cv_.notify_one();
        }
    }

    void work() {
        const auto* fn = job_fn_;
        const std::size_t n = job_size_;
        const std::size_t chunk = chunk_;
        for (;;) {
            const std::size_t begin = next_.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = begin + chunk < n ? begin + chunk : n;
            for (std::size_t i = begin; i < end; ++i) (*fn)(i);
        }
    }

    std::mutex run_mutex_;
    std::mutex mutex_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> workers_;
    const std::function<void(std::size_t)>* job_fn_ = nullptr;
    std::size_t job_size_ = 0;
    std::size_t chunk_ = 1;
    std::atomic<std::size_t> next_{0};
    int participants_ = 0;
    int active_ = 0;
    bool stop_ = false;
    std::uint64_t generation_ = 0;
};

} // namespace detail

// Runs fn(0..n-1); with threads > 1 the indices are distributed over the pool.
// Callers write results into per-index slots, so the output does not depend on
// the schedule.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0) {
    if (threads <= 0) threads = max_threads();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    detail::WorkerPool::instance().run(n, fn, threads);
}

} // namespace fiberot
