#pragma once
// Shared plumbing: seed derivation, a deterministic RNG with hand-rolled
// distributions (std:: distribution output is implementation-defined, which
// would break bitwise reproducibility across toolchains), FNV hashing,
// a chunked parallel_for, and the PPT_LOG-driven logger.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ppt {

// ---------------------------------------------------------------------------
// Seed mixing (splitmix64 finalizer)
// ---------------------------------------------------------------------------

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) {
    return mix64(mix64(a, b), c);
}

// ---------------------------------------------------------------------------
// FNV-1a
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void* data, size_t n,
                        uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s,
                        uint64_t h = 14695981039346656037ull) {
    return fnv1a64(s.data(), s.size(), h);
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

// mt19937_64 with explicit distribution code on top. The engine's textual
// state format is standardized, so serialize/deserialize round-trips across
// builds; every draw below is a pure function of the engine stream.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    // Unbiased integer in [lo, hi] via rejection sampling.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
        const uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        if (range == 0) return static_cast<int64_t>(next());  // full 64-bit span
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t x = next();
        while (x >= limit) x = next();
        return lo + static_cast<int64_t>(x % range);
    }

    // Index in [0, n); n must be positive.
    size_t uniform_index(size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
        return static_cast<size_t>(uniform_int(0, static_cast<int64_t>(n) - 1));
    }

    // [0, 1) with 53-bit resolution.
    double uniform_real() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Box-Muller computed fresh on every call; no cached spare, so the
    // engine stream fully determines the output sequence.
    double normal(double mean, double stddev) {
        double u1 = uniform_real();
        while (u1 <= 0.0) u1 = uniform_real();
        const double u2 = uniform_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        return mean + stddev * r * std::cos(theta);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {  // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    static Rng deserialize(const std::string& state) {
        Rng r;
        std::istringstream is(state);
        is >> r.engine_;
        if (is.fail()) throw std::runtime_error("Rng: bad serialized state");
        return r;
    }

    friend bool operator==(const Rng& a, const Rng& b) {
        return a.engine_ == b.engine_;
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// parallel_for
// ---------------------------------------------------------------------------

// Runs fn(0..n-1) over `threads` workers. Items must be independent; the
// first exception thrown by any worker is rethrown on the calling thread.
inline void parallel_for(size_t n, int threads,
                         const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t nworkers = std::min<size_t>(static_cast<size_t>(threads), n);
    std::atomic<size_t> cursor{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (size_t w = 0; w < nworkers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = cursor.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    break;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Logging (level from PPT_LOG: quiet|info|debug)
// ---------------------------------------------------------------------------

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level();
void set_log_level(LogLevel level);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace ppt
