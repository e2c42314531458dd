// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigsim {

// Virtual time in integer nanoseconds. All model parameters are stored in ns
// so that event ordering never depends on float rounding.
using TimeNs = std::int64_t;

struct CausalityError : std::runtime_error {
    explicit CausalityError(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};
struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};
struct TraceError : std::runtime_error {
    explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

/// Deterministic seeded generator. Raw mt19937_64 output is fully specified by
/// the standard; all distributions are derived here from raw bits so that two
/// runs with the same seed agree on every platform.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(splitmix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        // xorshift* step; tiny, seedable, platform-stable
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    // unbiased integer in [0, bound)
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) return 0;
        std::uint64_t threshold = (-bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // uniform double in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

using EventId = std::uint64_t;
using Action = std::function<void()>;

/// Discrete-event engine: a virtual clock plus a (fire_time, sequence) ordered
/// event queue. Single-threaded per run; independent runs may execute on
/// different threads with no shared state.
class SimEngine {
  public:
    SimEngine() = default;

    TimeNs now() const { return now_; }

    // Enqueue an action. fire_time must not lie in the past; tied fire_times
    // run in insertion order.
    EventId schedule(TimeNs fire_time, Action action) {
        if (fire_time < now_) {
            throw CausalityError("schedule: fire_time " + std::to_string(fire_time) +
                                 " precedes clock " + std::to_string(now_));
        }
        EventId id = next_seq_++;
        queue_.push(Event{fire_time, id, std::move(action)});
        return id;
    }

    // Process events until the queue empties. Returns the fire_time of the
    // last processed event, 0 if none was processed.
    TimeNs run_until_idle() {
        TimeNs last = 0;
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.fire_time;
            last = ev.fire_time;
            ev.action();
        }
        return last;
    }

    std::size_t pending() const { return queue_.size(); }

  private:
    struct Event {
        TimeNs fire_time;
        EventId sequence;
        Action action;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
            return a.sequence > b.sequence;
        }
    };

    TimeNs now_ = 0;
    EventId next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

}  // namespace sigsim
