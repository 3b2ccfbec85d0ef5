#pragma once

#include "efr/event.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace efr {

/// Half-open interval [t_start, t_end).
struct TimeWindow {
    double t_start = 0.0;
    double t_end = 0.0;

    bool contains(double t) const noexcept { return t >= t_start && t < t_end; }
    double duration() const noexcept { return t_end - t_start; }
};

/// foreground / flicker event counts. snr is empty when no flicker event fell
/// in the window.
struct SnrReport {
    std::size_t foreground_count = 0;
    std::size_t flicker_count = 0;
    std::optional<double> snr;
    TimeWindow window;

    /// Single-line JSON record.
    std::string to_record() const {
        nlohmann::ordered_json j;
        j["foreground_count"] = foreground_count;
        j["flicker_count"] = flicker_count;
        j["snr"] = snr ? nlohmann::ordered_json(*snr) : nlohmann::ordered_json(nullptr);
        j["t_start"] = window.t_start;
        j["t_end"] = window.t_end;
        return j.dump();
    }
};

namespace detail {

inline void check_window(const TimeWindow& w) {
    if (!(w.t_end > w.t_start)) throw Error("time window must be nonempty");
}

inline SnrReport finish_report(std::size_t fg, std::size_t fl, const TimeWindow& w) {
    SnrReport r{fg, fl, std::nullopt, w};
    if (fl > 0) r.snr = static_cast<double>(fg) / static_cast<double>(fl);
    return r;
}

}  // namespace detail

/// Label-based counting.
inline SnrReport snr(std::span<const LabeledEvent> events, const TimeWindow& window) {
    detail::check_window(window);
    std::size_t fg = 0, fl = 0;
    for (const auto& le : events) {
        if (!window.contains(le.event.t)) continue;
        (le.label == Label::flicker ? fl : fg) += 1;
    }
    return detail::finish_report(fg, fl, window);
}

/// Region-based counting: events inside flicker_region count as flicker.
inline SnrReport snr(std::span<const Event> events, const PixelRect& flicker_region, const TimeWindow& window) {
    detail::check_window(window);
    std::size_t fg = 0, fl = 0;
    for (const auto& e : events) {
        if (!window.contains(e.t)) continue;
        (flicker_region.contains(e.x, e.y) ? fl : fg) += 1;
    }
    return detail::finish_report(fg, fl, window);
}

/// (filtered - raw) / raw.
inline double snr_improvement(double raw, double filtered) {
    if (!(raw > 0.0) || !std::isfinite(raw) || !std::isfinite(filtered)) {
        throw Error("snr_improvement needs a positive finite raw snr");
    }
    return (filtered - raw) / raw;
}

inline double snr_improvement(const SnrReport& raw, const SnrReport& filtered) {
    if (!raw.snr || !filtered.snr) throw Error("snr_improvement: snr undefined (no flicker events in window)");
    return snr_improvement(*raw.snr, *filtered.snr);
}

struct RateMap {
    SensorGeometry geometry;
    double duration = 0.0;
    std::vector<double> rates;  // row-major, events / s

    double at(std::uint32_t x, std::uint32_t y) const { return rates.at(geometry.index(x, y)); }
    double max() const { return rates.empty() ? 0.0 : *std::max_element(rates.begin(), rates.end()); }

    std::pair<std::uint32_t, std::uint32_t> argmax() const {
        const auto it = std::max_element(rates.begin(), rates.end());
        const auto i = static_cast<std::size_t>(it - rates.begin());
        return {static_cast<std::uint32_t>(i % geometry.width), static_cast<std::uint32_t>(i / geometry.width)};
    }
};

/// Per-pixel count in [t_start, t_start + duration) divided by duration.
inline RateMap rate_map(std::span<const Event> events, SensorGeometry geometry, double t_start,
                        double duration = 0.03) {
    geometry.validate();
    if (!(duration > 0.0)) throw Error("rate_map duration must be > 0");
    RateMap map{geometry, duration, std::vector<double>(geometry.pixel_count(), 0.0)};
    std::vector<std::uint64_t> counts(geometry.pixel_count(), 0);
    const TimeWindow w{t_start, t_start + duration};
    for (const auto& e : events) {
        if (w.contains(e.t) && geometry.contains(e.x, e.y)) ++counts[geometry.index(e.x, e.y)];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) map.rates[i] = static_cast<double>(counts[i]) / duration;
    return map;
}

inline void write_rate_map_csv(std::ostream& os, const RateMap& map) {
    os.precision(12);
    for (std::uint32_t y = 0; y < map.geometry.height; ++y) {
        for (std::uint32_t x = 0; x < map.geometry.width; ++x) {
            if (x) os << ',';
            os << map.at(x, y);
        }
        os << '\n';
    }
}

/// Binary 8-bit PGM, rates scaled linearly so the map maximum becomes 255.
inline void write_rate_map_pgm(std::ostream& os, const RateMap& map, const std::string& comment = {}) {
    os << "P5\n";
    if (!comment.empty()) os << "# " << comment << '\n';
    os << map.geometry.width << ' ' << map.geometry.height << "\n255\n";
    const double peak = map.max();
    for (double r : map.rates) {
        const double v = peak > 0.0 ? std::round(255.0 * r / peak) : 0.0;
        os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
    }
}

}  // namespace efr
