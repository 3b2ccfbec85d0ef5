#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace efr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sign of a log-intensity change. Stored as 0/1 on disk, -1/+1 in memory.
enum class Polarity : std::int8_t { negative = -1, positive = 1 };

constexpr int sign(Polarity p) noexcept { return static_cast<int>(p); }

constexpr Polarity polarity_of(double value) noexcept {
    return value < 0.0 ? Polarity::negative : Polarity::positive;
}

/// One asynchronous brightness-change sample.
struct Event {
    double t = 0.0;  // seconds
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    Polarity polarity = Polarity::positive;

    friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
    std::uint32_t width = 1;
    std::uint32_t height = 1;

    constexpr bool contains(std::uint32_t x, std::uint32_t y) const noexcept {
        return x < width && y < height;
    }
    constexpr std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * height;
    }
    constexpr std::size_t index(std::uint32_t x, std::uint32_t y) const noexcept {
        return static_cast<std::size_t>(y) * width + x;
    }

    void validate() const {
        if (width < 1 || height < 1) {
            throw Error("sensor geometry must be at least 1x1");
        }
    }

    friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// Axis-aligned pixel rectangle [x, x + width) x [y, y + height).
struct PixelRect {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    constexpr bool empty() const noexcept { return width == 0 || height == 0; }
    constexpr bool contains(std::uint32_t px, std::uint32_t py) const noexcept {
        return px >= x && py >= y && px - x < width && py - y < height;
    }
    constexpr std::size_t area() const noexcept {
        return static_cast<std::size_t>(width) * height;
    }
    constexpr bool inside(const SensorGeometry& g) const noexcept {
        return std::uint64_t{x} + width <= g.width && std::uint64_t{y} + height <= g.height;
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

enum class Label : std::uint8_t { flicker, foreground };

inline std::string to_string(Label label) {
    return label == Label::flicker ? "flicker" : "foreground";
}

struct LabeledEvent {
    Event event;
    Label label = Label::foreground;

    friend bool operator==(const LabeledEvent&, const LabeledEvent&) = default;
};

}  // namespace efr
