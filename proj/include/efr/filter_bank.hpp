#pragma once

#include "efr/comb_filter.hpp"
#include "efr/event.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace efr {

struct FilterOptions {
    std::optional<double> drain;     // seconds past the last input; default 5 tau1
    std::optional<double> end_time;  // absolute end, overrides drain
    unsigned workers = 1;
};

/// Sorts by (t, y, x); ties keep their relative order.
inline void sort_events(std::vector<Event>& events) {
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
}

namespace detail {

struct PixelInput {
    Tick t;
    double dx;
};

/// Runs one pixel over its (time-sorted, tick-merged) inputs, then drains to end.
template <class Emit>
void run_pixel(PixelFilter& pf, std::span<const PixelInput> inputs, Tick end, Emit&& emit) {
    auto sample_at = [&](Tick t) { pf.sample([&](Polarity p) { emit(t, p); }); };
    auto on_change = [&](const OutputChange& c) { sample_at(c.t); };
    for (const auto& in : inputs) {
        pf.mature_until(in.t - 1, on_change);
        if (in.dx != 0.0) {
            pf.apply_input_step(in.t, in.dx);
            sample_at(in.t);
        } else {
            pf.mature_until(in.t, on_change);
        }
    }
    pf.mature_until(end, on_change);
}

}  // namespace detail

/// Online filter over a whole sensor. Pixel states are created on first input.
/// Not safe for concurrent mutation; shard by pixel instead (see filter_stream).
class FilterBank {
public:
    FilterBank(SensorGeometry geometry, FilterConfig config)
        : geometry_(geometry), config_(config) {
        geometry_.validate();
        config_.validate();
        states_.resize(geometry_.pixel_count());
    }

    const SensorGeometry& geometry() const noexcept { return geometry_; }
    const FilterConfig& config() const noexcept { return config_; }
    Tick current_tick() const noexcept { return now_; }

    std::size_t active_pixels() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(states_.begin(), states_.end(), [](const auto& s) { return s.has_value(); }));
    }

    const PixelFilter* state(std::uint32_t x, std::uint32_t y) const {
        const auto& s = states_.at(geometry_.index(x, y));
        return s ? &*s : nullptr;
    }

    /// Feeds one event; emitted output events are appended to out in emission
    /// order (not globally sorted).
    void push(const Event& e, std::vector<Event>& out) {
        if (!geometry_.contains(e.x, e.y)) {
            throw Error("event pixel (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                        ") outside sensor geometry");
        }
        auto& slot = states_[geometry_.index(e.x, e.y)];
        if (!slot) slot.emplace(config_);
        auto& pf = *slot;
        const Tick t = to_ticks(e.t);
        if (t < pf.last_update()) {
            throw MonotonicityError("pixel (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                                    "): event at t=" + std::to_string(e.t) + " is out of order");
        }
        auto emit = [&](Tick at, Polarity p) { out.push_back({to_seconds(at), e.x, e.y, p}); };
        const detail::PixelInput in{t, sign(e.polarity) * config_.contrast};
        detail::run_pixel(pf, std::span(&in, 1), t, emit);
        now_ = std::max(now_, t);
    }

    /// Matures every pixel up to end_time seconds.
    void finish(double end_time, std::vector<Event>& out) {
        const Tick end = to_ticks(end_time);
        for (std::uint32_t y = 0; y < geometry_.height; ++y) {
            for (std::uint32_t x = 0; x < geometry_.width; ++x) {
                auto& slot = states_[geometry_.index(x, y)];
                if (!slot) continue;
                auto& pf = *slot;
                pf.mature_until(end, [&](const OutputChange& c) {
                    pf.sample([&](Polarity p) { out.push_back({to_seconds(c.t), x, y, p}); });
                });
            }
        }
        now_ = std::max(now_, end);
    }

private:
    SensorGeometry geometry_;
    FilterConfig config_;
    std::vector<std::optional<PixelFilter>> states_;
    Tick now_ = 0;
};

/// Filters a whole stream. Pixels are sharded across `options.workers`
/// threads; the result is sorted by (t, y, x, emission order) and does not
/// depend on the worker count.
inline std::vector<Event> filter_stream(std::span<const Event> events, SensorGeometry geometry,
                                        const FilterConfig& config, const FilterOptions& options = {}) {
    geometry.validate();
    config.validate();
    if (events.empty()) return {};

    // Bucket by pixel, merging same-tick inputs.
    std::vector<std::vector<detail::PixelInput>> buckets(geometry.pixel_count());
    std::vector<std::size_t> last_index(geometry.pixel_count(), 0);
    Tick last_tick = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (!geometry.contains(e.x, e.y)) {
            throw Error("event " + std::to_string(i) + ": pixel (" + std::to_string(e.x) + ", " +
                        std::to_string(e.y) + ") outside sensor geometry");
        }
        const auto idx = geometry.index(e.x, e.y);
        auto& b = buckets[idx];
        const Tick t = to_ticks(e.t);
        const double dx = sign(e.polarity) * config.contrast;
        if (!b.empty() && t < b.back().t) {
            throw MonotonicityError("event " + std::to_string(i) + " at pixel (" + std::to_string(e.x) +
                                    ", " + std::to_string(e.y) + ") precedes event " +
                                    std::to_string(last_index[idx]) + " of the same pixel");
        }
        if (!b.empty() && b.back().t == t) {
            b.back().dx += dx;
        } else {
            b.push_back({t, dx});
        }
        last_index[idx] = i;
        last_tick = std::max(last_tick, t);
    }

    Tick end = 0;
    if (options.end_time) {
        end = to_ticks(*options.end_time);
    } else {
        end = last_tick + to_ticks(options.drain.value_or(5.0 * config.tau1));
    }

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        if (!buckets[i].empty()) active.push_back(i);
    }

    using Emitted = std::vector<std::pair<Tick, Polarity>>;
    std::vector<Emitted> emitted(active.size());
    auto work = [&](unsigned shard, unsigned shards) {
        for (std::size_t k = shard; k < active.size(); k += shards) {
            PixelFilter pf(config);
            auto& out = emitted[k];
            detail::run_pixel(pf, buckets[active[k]], end,
                              [&](Tick t, Polarity p) { out.emplace_back(t, p); });
        }
    };
    const unsigned shards = std::max(1u, options.workers);
    if (shards == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(shards);
        for (unsigned s = 0; s < shards; ++s) pool.emplace_back(work, s, shards);
    }

    // Pixels are visited in (y, x) order, so a stable sort on the tick alone
    // yields (t, y, x, emission order).
    struct Out {
        Tick t;
        std::uint32_t x, y;
        Polarity p;
    };
    std::vector<Out> merged;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const auto x = static_cast<std::uint32_t>(active[k] % geometry.width);
        const auto y = static_cast<std::uint32_t>(active[k] / geometry.width);
        for (const auto& [t, p] : emitted[k]) merged.push_back({t, x, y, p});
    }
    std::stable_sort(merged.begin(), merged.end(), [](const Out& a, const Out& b) { return a.t < b.t; });

    std::vector<Event> result;
    result.reserve(merged.size());
    for (const auto& o : merged) result.push_back({to_seconds(o.t), o.x, o.y, o.p});
    return result;
}

}  // namespace efr
