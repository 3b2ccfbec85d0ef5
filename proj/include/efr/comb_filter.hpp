#pragma once

// Per-pixel event-domain comb filter.
//
// The filter
//
//            1 - e^{-s tau1}        1 - rho2 e^{-s tau2}
//   H(s) = ------------------- * ----------------------
//          1 - rho1 e^{-s tau1}     1 - e^{-s tau2}
//
// is run as one combined recursion on the step changes of a zero-order-hold
// input x(t) (the integral of the event train):
//
//   dy(t) = dx(t) - dx(t-tau1) - rho2 dx(t-tau2) + rho2 dx(t-tau1-tau2)
//         + rho1 dy(t-tau1) + dy(t-tau2) - rho1 dy(t-tau1-tau2)
//
// Every nonzero dx or dy schedules its delayed contributions into three FIFOs,
// one per lag. Time is kept in integer nanosecond ticks so that delayed copies
// meant to cancel land on exactly the same tick.

#include "efr/event.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace efr {

using Tick = std::int64_t;

inline constexpr double ticks_per_second = 1e9;

inline Tick to_ticks(double seconds) { return std::llround(seconds * ticks_per_second); }
inline double to_seconds(Tick t) { return static_cast<double>(t) / ticks_per_second; }

class ConfigError : public Error {
public:
    using Error::Error;
};

class MonotonicityError : public Error {
public:
    using Error::Error;
};

struct FilterConfig {
    double base_frequency = 50.0;  // Hz
    double tau1 = 0.02;            // s, base period
    double tau2 = 0.002;           // s
    double rho1 = 0.6;
    double rho2 = 0.96;
    double contrast = 1.0;           // log-intensity per input event
    double sampler_threshold = 1.0;  // log-intensity per output event
    double prune_epsilon = 1e-9;     // relative to contrast

    /// tau1 = 1/f0, tau2 = tau1/10 and rho2 = 1 - (1 - rho1)/10, which keeps
    /// tau2 (1 - rho1) = tau1 (1 - rho2) and hence unit DC gain.
    static FilterConfig for_base_frequency(double f0, double rho1 = 0.6, double contrast = 1.0) {
        FilterConfig c;
        c.base_frequency = f0;
        c.tau1 = 1.0 / f0;
        c.tau2 = c.tau1 / 10.0;
        c.rho1 = rho1;
        c.rho2 = 1.0 - (1.0 - rho1) / 10.0;
        c.contrast = contrast;
        c.sampler_threshold = contrast;
        return c;
    }

    /// tau2 (1 - rho1) - tau1 (1 - rho2), relative to tau1 (1 - rho2).
    double tuning_residual() const {
        return (tau2 * (1.0 - rho1) - tau1 * (1.0 - rho2)) / (tau1 * (1.0 - rho2));
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("invalid filter config: " + m); };
        if (!(base_frequency > 0.0) || !std::isfinite(base_frequency)) fail("base_frequency must be > 0");
        if (!(rho1 > 0.0 && rho1 < 1.0)) fail("rho1 must lie in (0, 1)");
        if (!(rho2 > 0.0 && rho2 < 1.0)) fail("rho2 must lie in (0, 1)");
        if (!std::isfinite(tau1)) fail("tau1 must be finite");
        if (!(tau2 > 0.0)) fail("tau2 must be > 0");
        if (!(tau2 < tau1)) fail("tau2 must be smaller than tau1");
        if (!(contrast > 0.0) || !std::isfinite(contrast)) fail("contrast must be > 0");
        if (!(sampler_threshold > 0.0) || !std::isfinite(sampler_threshold)) fail("sampler_threshold must be > 0");
        if (!(prune_epsilon >= 0.0)) fail("prune_epsilon must be >= 0");
        if (to_ticks(tau2) < 1) fail("tau2 is below the 1 ns time resolution");
    }

    /// key=value pairs with shortest round-trip number formatting.
    std::string describe() const {
        std::string out;
        auto field = [&](const char* key, double v) {
            char buf[32];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            if (!out.empty()) out += ' ';
            out += key;
            out += '=';
            out.append(buf, ptr);
        };
        field("base_frequency", base_frequency);
        field("tau1", tau1);
        field("tau2", tau2);
        field("rho1", rho1);
        field("rho2", rho2);
        field("contrast", contrast);
        field("sampler_threshold", sampler_threshold);
        field("prune_epsilon", prune_epsilon);
        return out;
    }
};

/// Delays in ticks. When tau1/tau2 is (numerically) an integer R the long lag
/// is forced to exactly R short lags so the tau2 loop cancels on the tick grid.
struct LagTicks {
    Tick short_lag = 0;  // tau2
    Tick long_lag = 0;   // tau1
    Tick combined = 0;   // tau1 + tau2

    static LagTicks from(const FilterConfig& c) {
        LagTicks l;
        l.short_lag = to_ticks(c.tau2);
        const double ratio = c.tau1 / c.tau2;
        const double r = std::round(ratio);
        if (r >= 1.0 && std::abs(ratio - r) <= 1e-6 * r) {
            l.long_lag = static_cast<Tick>(r) * l.short_lag;
        } else {
            l.long_lag = to_ticks(c.tau1);
        }
        l.combined = l.long_lag + l.short_lag;
        return l;
    }
};

enum class DeltaPath : std::uint8_t { input, output };

/// A delayed term of the recursion waiting in one of the lag FIFOs.
struct ScheduledDelta {
    Tick due = 0;
    double amplitude = 0.0;
    DeltaPath path = DeltaPath::input;
};

enum class Lag : std::size_t { short_lag = 0, long_lag = 1, combined = 2 };

struct OutputChange {
    Tick t = 0;
    double dy = 0.0;

    friend bool operator==(const OutputChange&, const OutputChange&) = default;
};

/// Delay-line state and sampler for one pixel.
class PixelFilter {
public:
    explicit PixelFilter(const FilterConfig& config)
        : lags_(LagTicks::from(config)),
          rho1_(config.rho1),
          rho2_(config.rho2),
          theta_(config.sampler_threshold),
          prune_(config.prune_epsilon * config.contrast) {}

    double output() const noexcept { return y_; }
    double reference() const noexcept { return ref_; }
    Tick last_update() const noexcept { return last_update_; }
    const LagTicks& lags() const noexcept { return lags_; }

    std::size_t pending() const noexcept {
        return queues_[0].size() + queues_[1].size() + queues_[2].size();
    }
    const std::deque<ScheduledDelta>& queue(Lag lag) const noexcept {
        return queues_[static_cast<std::size_t>(lag)];
    }

    /// Earliest due tick among pending deltas, or max() when idle.
    Tick next_due() const noexcept {
        Tick next = std::numeric_limits<Tick>::max();
        for (const auto& q : queues_) {
            if (!q.empty() && q.front().due < next) next = q.front().due;
        }
        return next;
    }

    /// Enqueues a delta directly. Used to seed states in tests and tools; the
    /// due tick must not precede anything already in that FIFO.
    void schedule(Lag lag, ScheduledDelta delta) {
        auto& q = queues_[static_cast<std::size_t>(lag)];
        if (!q.empty() && delta.due < q.back().due) {
            throw MonotonicityError("scheduled delta out of order");
        }
        q.push_back(delta);
    }

    /// Applies an input step dx at tick t. Deltas due exactly at t are folded
    /// into the same change; deltas due earlier must already be matured.
    /// Returns the resulting output change dy.
    double apply_input_step(Tick t, double dx) {
        if (t < last_update_) {
            throw MonotonicityError("input at tick " + std::to_string(t) +
                                    " precedes last update at " + std::to_string(last_update_));
        }
        if (dx == 0.0 || !std::isfinite(dx)) {
            throw std::invalid_argument("input step must be finite and nonzero");
        }
        if (next_due() < t) {
            throw std::logic_error("apply_input_step: pending deltas before t; call mature_until first");
        }
        double dy = dx + pop_due(t);
        last_update_ = t;
        schedule_input(t, dx);
        if (dy != 0.0) {
            y_ += dy;
            schedule_output(t, dy);
        }
        return dy;
    }

    /// Matures every pending delta with due <= t in time order. Deltas sharing
    /// a tick are summed into one change. on_change(OutputChange) runs after
    /// each change has been applied to the output.
    template <class OnChange>
    void mature_until(Tick t, OnChange&& on_change) {
        for (;;) {
            const Tick next = next_due();
            if (next > t) break;
            const double dy = pop_due(next);
            last_update_ = next;
            if (dy == 0.0) continue;
            y_ += dy;
            schedule_output(next, dy);
            on_change(OutputChange{next, dy});
        }
    }

    std::vector<OutputChange> mature_until(Tick t) {
        std::vector<OutputChange> changes;
        mature_until(t, [&](const OutputChange& c) { changes.push_back(c); });
        return changes;
    }

    /// Threshold sampler: one event per full threshold crossing of the output
    /// against the reference; the residual is kept.
    template <class Emit>
    void sample(Emit&& emit) {
        while (y_ - ref_ >= theta_) {
            ref_ += theta_;
            emit(Polarity::positive);
        }
        while (ref_ - y_ >= theta_) {
            ref_ -= theta_;
            emit(Polarity::negative);
        }
    }

    std::vector<Polarity> sample() {
        std::vector<Polarity> out;
        sample([&](Polarity p) { out.push_back(p); });
        return out;
    }

    /// Overrides the running output. Only meant for exercising the sampler.
    void set_output(double y) noexcept { y_ = y; }

private:
    double pop_due(Tick t) {
        double sum = 0.0;
        for (auto& q : queues_) {
            while (!q.empty() && q.front().due == t) {
                sum += q.front().amplitude;
                q.pop_front();
            }
        }
        return sum;
    }

    void push(Lag lag, Tick due, double amplitude, DeltaPath path) {
        if (std::abs(amplitude) < prune_ || amplitude == 0.0) return;
        queues_[static_cast<std::size_t>(lag)].push_back({due, amplitude, path});
    }

    void schedule_input(Tick t, double dx) {
        push(Lag::short_lag, t + lags_.short_lag, -rho2_ * dx, DeltaPath::input);
        push(Lag::long_lag, t + lags_.long_lag, -dx, DeltaPath::input);
        push(Lag::combined, t + lags_.combined, rho2_ * dx, DeltaPath::input);
    }

    void schedule_output(Tick t, double dy) {
        push(Lag::short_lag, t + lags_.short_lag, dy, DeltaPath::output);
        push(Lag::long_lag, t + lags_.long_lag, rho1_ * dy, DeltaPath::output);
        push(Lag::combined, t + lags_.combined, -rho1_ * dy, DeltaPath::output);
    }

    LagTicks lags_;
    double rho1_;
    double rho2_;
    double theta_;
    double prune_;
    std::array<std::deque<ScheduledDelta>, 3> queues_;
    double y_ = 0.0;
    double ref_ = 0.0;
    Tick last_update_ = std::numeric_limits<Tick>::min();
};

}  // namespace efr
