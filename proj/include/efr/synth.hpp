#pragma once

// Synthetic labeled event streams: a harmonically rich flickering region plus
// an optional moving rectangular foreground object, turned into events by
// level crossing of the per-pixel log intensity.

#include "efr/event.hpp"
#include "efr/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace efr {

struct Harmonic {
    int k = 1;       // multiple of the supply frequency
    double a = 0.0;  // cosine coefficient
    double b = 0.0;  // sine coefficient

    friend bool operator==(const Harmonic&, const Harmonic&) = default;
};

struct FlickerModel {
    double supply_frequency = 50.0;  // Hz
    std::vector<Harmonic> harmonics;
    PixelRect region;
    double dc_level = 0.0;

    /// Value of the periodic component at sample n of a grid at `rate` Hz.
    /// Phases are reduced in whole cycles first so equal phases give equal values.
    double value_at_sample(std::int64_t n, double rate) const {
        double v = 0.0;
        for (const auto& h : harmonics) {
            const double cycles = static_cast<double>(h.k) * supply_frequency * static_cast<double>(n) / rate;
            const double angle = 2.0 * std::numbers::pi * (cycles - std::floor(cycles));
            v += h.a * std::cos(angle) + h.b * std::sin(angle);
        }
        return v;
    }

    double highest_frequency() const {
        double f = 0.0;
        for (const auto& h : harmonics) {
            if (h.a != 0.0 || h.b != 0.0) f = std::max(f, std::abs(h.k) * supply_frequency);
        }
        return f;
    }

    friend bool operator==(const FlickerModel&, const FlickerModel&) = default;
};

/// Axis-aligned object of width x height pixels moving at constant velocity;
/// adds edge_contrast times its fractional pixel coverage to the log intensity.
struct ForegroundModel {
    double width = 6.0;
    double height = 4.0;
    double start_x = 0.0;  // top-left corner at t = 0
    double start_y = 0.0;
    double velocity_x = 0.0;  // pixels / s
    double velocity_y = 0.0;
    double edge_contrast = 0.5;

    double coverage(std::uint32_t px, std::uint32_t py, double t) const {
        const double x0 = start_x + velocity_x * t;
        const double y0 = start_y + velocity_y * t;
        const double ox = std::min<double>(px + 1.0, x0 + width) - std::max<double>(px, x0);
        const double oy = std::min<double>(py + 1.0, y0 + height) - std::max<double>(py, y0);
        return ox > 0.0 && oy > 0.0 ? ox * oy : 0.0;
    }

    friend bool operator==(const ForegroundModel&, const ForegroundModel&) = default;
};

struct SyntheticScene {
    SensorGeometry geometry{64, 64};
    double duration = 1.5;  // s
    FlickerModel flicker;
    std::optional<ForegroundModel> foreground;
    double contrast = 0.1;
    double simulation_rate = 10000.0;  // Hz
    double timestamp_resolution = 1e-6;  // s; 0 keeps raw interpolated times
    double noise_rate = 0.0;  // uniform random events per pixel per second
    std::uint64_t seed = 1;

    void validate() const;

    friend bool operator==(const SyntheticScene&, const SyntheticScene&) = default;
};

namespace detail {

/// Time interval during which [p0 + v t, p0 + v t + size) overlaps [0, extent).
inline std::pair<double, double> overlap_interval(double p0, double v, double size, double extent) {
    const double inf = std::numeric_limits<double>::infinity();
    if (v == 0.0) {
        return (p0 < extent && p0 + size > 0.0) ? std::pair{-inf, inf} : std::pair{inf, -inf};
    }
    double a = (0.0 - size - p0) / v;
    double b = (extent - p0) / v;
    if (a > b) std::swap(a, b);
    return {a, b};
}

}  // namespace detail

inline void SyntheticScene::validate() const {
    auto fail = [](const std::string& m) { throw Error("invalid scene: " + m); };
    geometry.validate();
    if (!(duration >= 0.0) || !std::isfinite(duration)) fail("duration must be >= 0");
    if (!(contrast > 0.0)) fail("contrast must be > 0");
    if (!(simulation_rate > 0.0)) fail("simulation_rate must be > 0");
    if (!(timestamp_resolution >= 0.0)) fail("timestamp_resolution must be >= 0");
    if (!(noise_rate >= 0.0)) fail("noise_rate must be >= 0");
    if (!(flicker.supply_frequency > 0.0)) fail("supply_frequency must be > 0");
    if (!flicker.region.inside(geometry)) fail("flicker region outside geometry");
    if (simulation_rate < 20.0 * flicker.highest_frequency()) {
        fail("simulation_rate must be at least 20x the highest harmonic frequency");
    }
    if (foreground) {
        const auto& f = *foreground;
        if (!(f.width > 0.0 && f.height > 0.0)) fail("foreground size must be positive");
        if (!std::isfinite(f.velocity_x) || !std::isfinite(f.velocity_y)) fail("foreground speed must be finite");
        const auto [ax, bx] = detail::overlap_interval(f.start_x, f.velocity_x, f.width, geometry.width);
        const auto [ay, by] = detail::overlap_interval(f.start_y, f.velocity_y, f.height, geometry.height);
        const double lo = std::max({ax, ay, 0.0});
        const double hi = std::min({bx, by, duration});
        if (duration > 0.0 && !(lo < hi)) fail("foreground never intersects the frame");
    }
}

/// 64x64 sensor, central 16x16 flicker patch dominated by 100 Hz with 50, 200
/// and 300 Hz components, and a 6x4 bar crossing the frame below the patch.
/// The seed sets the bar's start phase.
inline SyntheticScene default_scene(SensorGeometry geometry = {64, 64}, double duration = 1.5,
                                    std::uint64_t seed = 1) {
    SyntheticScene s;
    s.geometry = geometry;
    s.duration = duration;
    s.seed = seed;
    s.contrast = 0.1;
    s.flicker.supply_frequency = 50.0;
    s.flicker.dc_level = 0.0137;
    // 100 Hz dominant, 50 Hz at 25 %, 200 and 300 Hz at 10 % each.
    s.flicker.harmonics = {{2, 0.4, 0.0}, {1, 0.06, 0.08}, {4, 0.0, 0.04}, {6, 0.04, 0.0}};
    const std::uint32_t pw = std::min<std::uint32_t>(16, geometry.width);
    const std::uint32_t ph = std::min<std::uint32_t>(16, geometry.height);
    s.flicker.region = {(geometry.width - pw) / 2, (geometry.height - ph) / 2, pw, ph};

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(-1.0, 1.0);
    ForegroundModel bar;
    bar.width = 6.0;
    bar.height = 4.0;
    bar.start_x = -bar.width + phase(rng);
    const double row = s.flicker.region.y + s.flicker.region.height + 4.0;
    bar.start_y = std::min(row, std::max(0.0, geometry.height - bar.height));
    bar.velocity_x = duration > 0.0 ? (geometry.width + bar.width) / duration : 0.0;
    bar.edge_contrast = 0.5;
    s.foreground = bar;
    return s;
}

struct GeneratedStream {
    std::vector<Event> events;
    std::vector<Label> labels;

    std::vector<LabeledEvent> labeled() const { return attach_labels(events, labels); }
};

inline GeneratedStream generate(const SyntheticScene& scene) {
    scene.validate();
    GeneratedStream out;
    const auto samples = static_cast<std::int64_t>(std::floor(scene.duration * scene.simulation_rate + 1e-9));
    if (samples <= 0) return out;

    const double rate = scene.simulation_rate;
    const double c = scene.contrast;
    const auto& geo = scene.geometry;
    const auto& region = scene.flicker.region;

    std::vector<double> flicker(static_cast<std::size_t>(samples) + 1);
    for (std::int64_t n = 0; n <= samples; ++n) flicker[n] = scene.flicker.value_at_sample(n, rate);

    auto quantize = [&](double t) {
        if (scene.timestamp_resolution <= 0.0) return t;
        return std::round(t / scene.timestamp_resolution) * scene.timestamp_resolution;
    };

    // Bounding box of everything the foreground touches.
    std::uint32_t fx0 = geo.width, fy0 = geo.height, fx1 = 0, fy1 = 0;
    if (scene.foreground) {
        const auto& f = *scene.foreground;
        const double xe = f.start_x + f.velocity_x * scene.duration;
        const double ye = f.start_y + f.velocity_y * scene.duration;
        auto clampi = [](double v, std::uint32_t hi) {
            return static_cast<std::uint32_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
        };
        fx0 = clampi(std::floor(std::min(f.start_x, xe)), geo.width);
        fx1 = clampi(std::ceil(std::max(f.start_x, xe) + f.width), geo.width);
        fy0 = clampi(std::floor(std::min(f.start_y, ye)), geo.height);
        fy1 = clampi(std::ceil(std::max(f.start_y, ye) + f.height), geo.height);
    }

    struct Raw {
        double t;
        std::uint32_t x, y;
        Polarity p;
        Label label;
    };
    std::vector<Raw> raw;

    auto label_for = [&](std::uint32_t x, std::uint32_t y, double t) {
        if (!region.contains(x, y)) return Label::foreground;
        if (scene.foreground && scene.foreground->coverage(x, y, t) > 0.0) return Label::foreground;
        return Label::flicker;
    };

    for (std::uint32_t y = 0; y < geo.height; ++y) {
        for (std::uint32_t x = 0; x < geo.width; ++x) {
            const bool in_flicker = region.contains(x, y);
            const bool in_fg = x >= fx0 && x < fx1 && y >= fy0 && y < fy1;
            if (!in_flicker && !in_fg) continue;
            auto level_at = [&](std::int64_t n) {
                double l = scene.flicker.dc_level;
                if (in_flicker) l += flicker[n];
                if (in_fg) {
                    const auto& f = *scene.foreground;
                    l += f.edge_contrast * f.coverage(x, y, static_cast<double>(n) / rate);
                }
                return l;
            };
            double prev = level_at(0);
            auto index = static_cast<std::int64_t>(std::floor(prev / c));
            for (std::int64_t n = 1; n <= samples; ++n) {
                const double cur = level_at(n);
                const auto next = static_cast<std::int64_t>(std::floor(cur / c));
                if (next == index) {
                    prev = cur;
                    continue;
                }
                const int dir = next > index ? 1 : -1;
                // Up-crossings pass levels index+1..next, down-crossings index..next+1.
                for (std::int64_t j = dir > 0 ? index + 1 : index; dir > 0 ? j <= next : j > next; j += dir) {
                    const double frac = std::clamp((j * c - prev) / (cur - prev), 0.0, 1.0);
                    const double t = quantize((static_cast<double>(n - 1) + frac) / rate);
                    raw.push_back({t, x, y, dir > 0 ? Polarity::positive : Polarity::negative, label_for(x, y, t)});
                }
                index = next;
                prev = cur;
            }
        }
    }

    if (scene.noise_rate > 0.0) {
        std::mt19937_64 rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
        std::poisson_distribution<long> count(scene.noise_rate * scene.duration * geo.pixel_count());
        std::uniform_real_distribution<double> when(0.0, scene.duration);
        std::uniform_int_distribution<std::uint32_t> px(0, geo.width - 1), py(0, geo.height - 1);
        std::bernoulli_distribution pol(0.5);
        const long k = count(rng);
        for (long i = 0; i < k; ++i) {
            const double t = quantize(when(rng));
            const auto x = px(rng), y = py(rng);
            raw.push_back({t, x, y, pol(rng) ? Polarity::positive : Polarity::negative, label_for(x, y, t)});
        }
    }

    std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    out.events.reserve(raw.size());
    out.labels.reserve(raw.size());
    for (const auto& r : raw) {
        out.events.push_back({r.t, r.x, r.y, r.p});
        out.labels.push_back(r.label);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene description files: `key = value` lines, `#` comments.
//
//   width, height                  sensor size in pixels
//   duration                       seconds
//   contrast                       log intensity per event
//   simulation_rate                Hz
//   timestamp_resolution           seconds (0 = unquantized)
//   noise_rate                     events / pixel / s
//   seed                           unsigned integer
//   supply_frequency               Hz
//   dc_level                       log intensity
//   harmonic = k a b               repeatable; replaces the list on first use
//   flicker_region = x y w h
//   foreground = none | w h x0 y0 vx vy edge_contrast

inline std::string serialize_scene(const SyntheticScene& s) {
    std::ostringstream os;
    os.precision(17);
    os << "width = " << s.geometry.width << "\nheight = " << s.geometry.height << "\nduration = " << s.duration
       << "\ncontrast = " << s.contrast << "\nsimulation_rate = " << s.simulation_rate
       << "\ntimestamp_resolution = " << s.timestamp_resolution << "\nnoise_rate = " << s.noise_rate
       << "\nseed = " << s.seed << "\nsupply_frequency = " << s.flicker.supply_frequency
       << "\ndc_level = " << s.flicker.dc_level << '\n';
    for (const auto& h : s.flicker.harmonics) os << "harmonic = " << h.k << ' ' << h.a << ' ' << h.b << '\n';
    const auto& r = s.flicker.region;
    os << "flicker_region = " << r.x << ' ' << r.y << ' ' << r.width << ' ' << r.height << '\n';
    if (s.foreground) {
        const auto& f = *s.foreground;
        os << "foreground = " << f.width << ' ' << f.height << ' ' << f.start_x << ' ' << f.start_y << ' '
           << f.velocity_x << ' ' << f.velocity_y << ' ' << f.edge_contrast << '\n';
    } else {
        os << "foreground = none\n";
    }
    return os.str();
}

/// Keys absent from the file keep the values of `base`.
inline SyntheticScene parse_scene(std::string_view text, SyntheticScene base = default_scene()) {
    bool harmonics_reset = false;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (detail::is_ignored(line)) return;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected `key = value`");
        const std::string key(detail::trim(line.substr(0, eq)));
        std::istringstream is{std::string(detail::trim(line.substr(eq + 1)))};
        auto bad = [&] { throw ParseError(line_no, "invalid value for '" + key + "'"); };
        auto read = [&](auto&... vs) {
            ((is >> vs) && ...);
            std::string rest;
            if (is.fail() || (is >> rest)) bad();
        };
        if (key == "width") {
            read(base.geometry.width);
        } else if (key == "height") {
            read(base.geometry.height);
        } else if (key == "duration") {
            read(base.duration);
        } else if (key == "contrast") {
            read(base.contrast);
        } else if (key == "simulation_rate") {
            read(base.simulation_rate);
        } else if (key == "timestamp_resolution") {
            read(base.timestamp_resolution);
        } else if (key == "noise_rate") {
            read(base.noise_rate);
        } else if (key == "seed") {
            read(base.seed);
        } else if (key == "supply_frequency") {
            read(base.flicker.supply_frequency);
        } else if (key == "dc_level") {
            read(base.flicker.dc_level);
        } else if (key == "harmonic") {
            if (!harmonics_reset) {
                base.flicker.harmonics.clear();
                harmonics_reset = true;
            }
            Harmonic h;
            read(h.k, h.a, h.b);
            base.flicker.harmonics.push_back(h);
        } else if (key == "flicker_region") {
            auto& r = base.flicker.region;
            read(r.x, r.y, r.width, r.height);
        } else if (key == "foreground") {
            if (is.str() == "none") {
                base.foreground.reset();
            } else {
                ForegroundModel f;
                read(f.width, f.height, f.start_x, f.start_y, f.velocity_x, f.velocity_y, f.edge_contrast);
                base.foreground = f;
            }
        } else {
            throw ParseError(line_no, "unknown key '" + key + "'");
        }
    });
    return base;
}

}  // namespace efr
