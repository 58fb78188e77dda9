#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace t2tvit {

// Shape mismatches and invalid geometry. Messages name the offending shapes.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: unknown preset, malformed config, missing data file.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finiteness is required (e.g. NaN training loss).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// std::mt19937_64 is fully specified by the standard; the distribution
// transforms below are hand-rolled so that streams are bit-identical across
// platforms and standard libraries.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(engine_() % span);
    }

    // Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // avoid log(0)
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586477 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Normal(0, sigma) with rejection outside +-2 sigma.
    double trunc_normal(double sigma) {
        for (;;) {
            double x = normal();
            if (x >= -2.0 && x <= 2.0) return x * sigma;
        }
    }

    // Marsaglia-Tsang for alpha >= 1, boosted for alpha < 1.
    double gamma(double alpha) {
        if (alpha < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        double d = alpha - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double alpha, double b) {
        double x = gamma(alpha);
        double y = gamma(b);
        return x / (x + y);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(engine_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Fixed-size worker pool for data-parallel kernels. Work is partitioned into
// contiguous index ranges, each written by exactly one worker, so results are
// bit-identical for any thread count.
// ---------------------------------------------------------------------------
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int num_threads() const { return static_cast<int>(workers_.size()) + 1; }

    // fn(begin, end) over [0, n), chunked across workers plus the caller.
    void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
        int threads = num_threads();
        if (n <= 0) return;
        if (threads == 1 || n < 2) {
            fn(0, n);
            return;
        }
        int chunks = std::min<int64_t>(threads, n);
        int64_t per = (n + chunks - 1) / chunks;

        std::unique_lock<std::mutex> lock(mutex_);
        task_ = &fn;
        task_n_ = n;
        task_per_ = per;
        next_chunk_.store(1, std::memory_order_relaxed);
        pending_ = static_cast<int>(workers_.size());  // every worker checks in once
        ++generation_;
        lock.unlock();
        cv_.notify_all();

        fn(0, std::min(per, n));  // caller takes the first chunk

        std::unique_lock<std::mutex> wait_lock(mutex_);
        done_cv_.wait(wait_lock, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

private:
    ThreadPool() {
        int n = 0;
        if (const char* env = std::getenv("T2TVIT_THREADS")) {
            n = std::atoi(env);
        }
        if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
        n = std::min(n, 16);
        for (int i = 0; i < n - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void worker_loop() {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(int64_t, int64_t)>* task = nullptr;
            int64_t n = 0, per = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                task = task_;
                n = task_n_;
                per = task_per_;
            }
            if (!task) continue;
            bool worked = false;
            for (;;) {
                int64_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
                int64_t begin = c * per;
                if (begin >= n) break;
                (*task)(begin, std::min(begin + per, n));
                worked = true;
            }
            (void)worked;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (pending_ > 0) --pending_;
            }
            done_cv_.notify_one();
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int64_t, int64_t)>* task_ = nullptr;
    int64_t task_n_ = 0, task_per_ = 0;
    std::atomic<int64_t> next_chunk_{0};
    int pending_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace t2tvit
