#pragma once

#include "efr/comb_filter.hpp"
#include "efr/event.hpp"
#include "efr/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace efr {

using Complex = std::complex<double>;

namespace detail {

/// 1 - e^{-j theta} written as 2 sin^2(theta/2) + j sin(theta), which stays
/// accurate near theta = 0.
inline Complex one_minus_exp(double theta) {
    const double s = std::sin(0.5 * theta);
    return {2.0 * s * s, std::sin(theta)};
}

inline Complex one_minus_scaled_exp(double rho, double theta) {
    return {1.0 - rho * std::cos(theta), rho * std::sin(theta)};
}

}  // namespace detail

/// Feed-forward comb 1 - e^{-j omega tau}.
inline Complex h_feedforward(double omega, double tau) { return detail::one_minus_exp(omega * tau); }

/// Feed-forward/feedback comb (1 - e^{-j omega tau}) / (1 - rho e^{-j omega tau}).
inline Complex h_feedback(double omega, double tau, double rho) {
    const double theta = omega * tau;
    return detail::one_minus_exp(theta) / detail::one_minus_scaled_exp(rho, theta);
}

/// Radius in omega * tau2 inside which the removable singularity is replaced
/// by its series limit.
inline constexpr double singular_radius = 1e-6;

/// Cascade response. Where omega tau2 = 2 pi k and omega tau1 is also a
/// multiple of 2 pi, both 1 - e^{...} factors vanish; there the ratio
/// (1 - e^{-j R u}) / (1 - e^{-j u}), R = tau1/tau2, is replaced by its
/// first-order expansion R (1 - j (R - 1) u / 2).
inline Complex h_proposed(double omega, double tau1, double tau2, double rho1, double rho2) {
    const double theta1 = omega * tau1;
    const double theta2 = omega * tau2;
    const Complex rest = detail::one_minus_scaled_exp(rho2, theta2) /
                         detail::one_minus_scaled_exp(rho1, theta1);

    const double k2 = std::round(theta2 / (2.0 * std::numbers::pi));
    const double u = theta2 - 2.0 * std::numbers::pi * k2;
    if (std::abs(u) < singular_radius) {
        const double ratio = tau1 / tau2;
        const double turns1 = k2 * ratio;
        if (std::abs(turns1 - std::round(turns1)) < 1e-9 * std::max(1.0, std::abs(turns1))) {
            return ratio * Complex(1.0, -(ratio - 1.0) * u / 2.0) * rest;
        }
    }
    return detail::one_minus_exp(theta1) / detail::one_minus_exp(theta2) * rest;
}

inline Complex h_proposed(double omega, const FilterConfig& c) {
    return h_proposed(omega, c.tau1, c.tau2, c.rho1, c.rho2);
}

struct FrequencyResponse {
    double frequency = 0.0;  // Hz
    double magnitude = 0.0;
    double phase = 0.0;  // radians in (-pi, pi]
};

inline FrequencyResponse response_at(double frequency, const FilterConfig& c) {
    const Complex h = h_proposed(2.0 * std::numbers::pi * frequency, c);
    double phase = std::arg(h);
    if (phase <= -std::numbers::pi) phase = std::numbers::pi;
    return {frequency, std::abs(h), phase};
}

/// Log-spaced table over [f_min, f_max], both endpoints included.
inline std::vector<FrequencyResponse> bode_table(const FilterConfig& c, double f_min, double f_max,
                                                 unsigned points_per_decade) {
    if (!(f_min > 0.0 && f_min < f_max)) throw Error("bode_table requires 0 < f_min < f_max");
    if (points_per_decade == 0) throw Error("points_per_decade must be >= 1");
    const double decades = std::log10(f_max / f_min);
    const auto steps = std::max<long>(1, std::lround(std::ceil(decades * points_per_decade - 1e-9)));
    std::vector<FrequencyResponse> rows;
    rows.reserve(static_cast<std::size_t>(steps) + 1);
    for (long i = 0; i <= steps; ++i) {
        double f = f_min * std::pow(10.0, decades * static_cast<double>(i) / static_cast<double>(steps));
        if (i == 0) f = f_min;
        if (i == steps) f = f_max;
        rows.push_back(response_at(f, c));
    }
    return rows;
}

/// Floor for dB output so exact notches stay finite.
inline constexpr double min_mag_db = -400.0;

inline double to_db(double magnitude) {
    if (!(magnitude > 0.0)) return min_mag_db;
    return std::max(min_mag_db, 20.0 * std::log10(magnitude));
}

inline void write_bode_csv(std::ostream& os, std::span<const FrequencyResponse> rows) {
    os.precision(10);
    os << "freq_hz,mag_db,phase_deg\n";
    for (const auto& r : rows) {
        os << r.frequency << ',' << to_db(r.magnitude) << ',' << r.phase * 180.0 / std::numbers::pi << '\n';
    }
}

/// Region-mean zero-order-hold reconstruction of sum(sigma * contrast) on the
/// grid t_start + n / sample_rate. An event at exactly a grid time counts.
inline std::vector<double> reconstruct_zoh(std::span<const Event> events, const PixelRect& region,
                                           double sample_rate, double t_start, double t_end,
                                           double contrast) {
    if (region.empty()) throw Error("reconstruct_zoh: empty region");
    if (!(sample_rate > 0.0)) throw Error("reconstruct_zoh: sample_rate must be > 0");
    const long n = std::max(0L, std::lround((t_end - t_start) * sample_rate));
    std::vector<double> signal(static_cast<std::size_t>(n), 0.0);
    const double scale = contrast / static_cast<double>(region.area());

    double level = 0.0;
    std::size_t i = 0;
    for (long k = 0; k < n; ++k) {
        const double g = t_start + static_cast<double>(k) / sample_rate;
        while (i < events.size() && events[i].t <= g) {
            if (region.contains(events[i].x, events[i].y)) level += sign(events[i].polarity) * scale;
            ++i;
        }
        signal[static_cast<std::size_t>(k)] = level;
    }
    return signal;
}

struct SpectrumData {
    std::vector<double> frequencies;  // Hz
    std::vector<double> power;        // signal^2 / Hz, one-sided
    double start_time = 0.0;
    double duration = 0.0;
    double sample_rate = 0.0;
    std::size_t fft_length = 0;
    std::string taper = "hann";

    double bin_width() const { return sample_rate / static_cast<double>(fft_length); }
};

/// Single-window periodogram: mean removed, Hann taper, zero padding to a
/// power of two. Normalized by the taper energy so that sum(power) * df equals
/// the mean square of the tapered signal divided by the mean square of the taper.
inline SpectrumData psd(std::span<const double> signal, double sample_rate, double start_time = 0.0) {
    if (signal.size() < 16) throw Error("psd: signal must have at least 16 samples");
    if (!(sample_rate > 0.0)) throw Error("psd: sample_rate must be > 0");
    const std::size_t n = signal.size();
    const std::size_t m = next_pow2(n);

    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(n);

    std::vector<Complex> buf(m, Complex{});
    double taper_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                              static_cast<double>(n - 1));
        taper_energy += w * w;
        buf[i] = (signal[i] - mean) * w;
    }
    fft_inplace(buf);

    SpectrumData out;
    out.start_time = start_time;
    out.duration = static_cast<double>(n) / sample_rate;
    out.sample_rate = sample_rate;
    out.fft_length = m;
    const double norm = 1.0 / (sample_rate * taper_energy);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        double p = std::norm(buf[k]) * norm;
        if (k != 0 && k != m / 2) p *= 2.0;
        out.frequencies.push_back(static_cast<double>(k) * sample_rate / static_cast<double>(m));
        out.power.push_back(p);
    }
    return out;
}

inline void write_psd_csv(std::ostream& os, const SpectrumData& s) {
    os.precision(12);
    os << "freq_hz,power\n";
    for (std::size_t i = 0; i < s.frequencies.size(); ++i) {
        os << s.frequencies[i] << ',' << s.power[i] << '\n';
    }
}

inline double band_power(const SpectrumData& s, double f, double bandwidth) {
    const double lo = f - bandwidth / 2.0;
    const double hi = f + bandwidth / 2.0;
    double sum = 0.0;
    std::size_t bins = 0;
    for (std::size_t i = 0; i < s.frequencies.size(); ++i) {
        if (s.frequencies[i] >= lo && s.frequencies[i] <= hi) {
            sum += s.power[i];
            ++bins;
        }
    }
    if (bins == 0) throw Error("band contains no frequency bins");
    return sum;
}

/// 10 log10(raw band power / filtered band power); positive means attenuation.
/// Infinite when the filtered band holds no power at all.
inline double attenuation_at(const SpectrumData& raw, const SpectrumData& filtered, double f,
                             double bandwidth) {
    if (raw.frequencies != filtered.frequencies) throw Error("spectra do not share a frequency grid");
    const double r = band_power(raw, f, bandwidth);
    const double q = band_power(filtered, f, bandwidth);
    if (q == 0.0) return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(r / q);
}

}  // namespace efr
