#pragma once

// Line-oriented text format for event streams:
//
//   # comment
//   <t seconds> <x> <y> <p in {0,1}>
//
// plus a label sidecar holding one `flicker` / `foreground` token per event.

#include "efr/event.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace efr {

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct LineIssue {
    std::size_t line = 0;  // 1-based
    std::string message;
};

/// Outcome of a non-throwing scan. Every input line lands in exactly one of
/// events, errors or ignored_lines (comments and blank lines).
struct ScanReport {
    std::vector<Event> events;
    std::vector<std::size_t> event_lines;
    std::vector<LineIssue> errors;
    std::size_t ignored_lines = 0;
    std::size_t line_count = 0;
};

struct ParsedStream {
    std::vector<Event> events;
    std::vector<std::size_t> event_lines;  // source line of each event
    std::optional<SensorGeometry> geometry;
};

namespace detail {

inline bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Splits on runs of blanks; returns false when more than `max` tokens exist.
template <std::size_t N>
bool split_tokens(std::string_view s, std::string_view (&out)[N], std::size_t& count) {
    count = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (count == N) return false;
        out[count++] = s.substr(i, j - i);
        i = j;
    }
    return true;
}

template <class T>
bool parse_number(std::string_view token, T& value) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc{} && ptr == last;
}

/// Parses one non-comment line. Returns an error message or nullopt.
inline std::optional<std::string> parse_event_line(std::string_view line,
                                                   const std::optional<SensorGeometry>& geometry,
                                                   Event& out) {
    std::string_view tok[4];
    std::size_t n = 0;
    if (!split_tokens(line, tok, n) || n != 4) {
        return "expected 4 fields `t x y p`";
    }
    double t = 0.0;
    if (!parse_number(tok[0], t) || !std::isfinite(t)) {
        return "invalid timestamp '" + std::string(tok[0]) + "'";
    }
    if (t < 0.0) {
        return "negative timestamp";
    }
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    if (!parse_number(tok[1], x)) return "invalid x '" + std::string(tok[1]) + "'";
    if (!parse_number(tok[2], y)) return "invalid y '" + std::string(tok[2]) + "'";
    Polarity p;
    if (tok[3] == "1") {
        p = Polarity::positive;
    } else if (tok[3] == "0") {
        p = Polarity::negative;
    } else {
        return "invalid polarity '" + std::string(tok[3]) + "'";
    }
    if (geometry && !geometry->contains(x, y)) {
        return "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
               std::to_string(geometry->width) + "x" + std::to_string(geometry->height) +
               " sensor";
    }
    out = Event{t, x, y, p};
    return std::nullopt;
}

/// Calls fn(line_number, line) for every line; a trailing newline does not
/// start an extra line.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        fn(++line_no, line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
}

inline bool is_ignored(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace detail

/// Scans the whole input, collecting per-line errors instead of throwing.
inline ScanReport scan_stream(std::string_view text,
                              const std::optional<SensorGeometry>& geometry = std::nullopt) {
    ScanReport report;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        report.line_count = line_no;
        if (detail::is_ignored(line)) {
            ++report.ignored_lines;
            return;
        }
        Event e;
        if (auto err = detail::parse_event_line(line, geometry, e)) {
            report.errors.push_back({line_no, std::move(*err)});
        } else {
            report.events.push_back(e);
            report.event_lines.push_back(line_no);
        }
    });
    return report;
}

/// Strict parse; throws ParseError naming the first bad line.
inline ParsedStream parse_stream(std::string_view text,
                                 const std::optional<SensorGeometry>& geometry = std::nullopt) {
    if (geometry) geometry->validate();
    ParsedStream out;
    out.geometry = geometry;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (detail::is_ignored(line)) return;
        Event e;
        if (auto err = detail::parse_event_line(line, geometry, e)) {
            throw ParseError(line_no, *err);
        }
        out.events.push_back(e);
        out.event_lines.push_back(line_no);
    });
    return out;
}

/// Shortest round-trip rendering of each timestamp.
inline std::string serialize_stream(std::span<const Event> events) {
    std::string out;
    out.reserve(events.size() * 24);
    for (const auto& e : events) {
        detail::append_double(out, e.t);
        out += ' ';
        out += std::to_string(e.x);
        out += ' ';
        out += std::to_string(e.y);
        out += e.polarity == Polarity::positive ? " 1\n" : " 0\n";
    }
    return out;
}

struct MonotoneReport {
    bool ok = true;
    std::optional<std::size_t> first_violation;  // index of the first event earlier than its predecessor
};

inline MonotoneReport validate_monotone(std::span<const Event> events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].t < events[i - 1].t) return {false, i};
    }
    return {};
}

/// Smallest geometry containing every event (1x1 for an empty stream).
inline SensorGeometry bounding_geometry(std::span<const Event> events) {
    SensorGeometry g{1, 1};
    for (const auto& e : events) {
        g.width = std::max(g.width, e.x + 1);
        g.height = std::max(g.height, e.y + 1);
    }
    return g;
}

inline std::vector<Label> parse_labels(std::string_view text) {
    std::vector<Label> labels;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (detail::is_ignored(line)) return;
        const auto tok = detail::trim(line);
        if (tok == "flicker") {
            labels.push_back(Label::flicker);
        } else if (tok == "foreground") {
            labels.push_back(Label::foreground);
        } else {
            throw ParseError(line_no, "invalid label '" + std::string(tok) + "'");
        }
    });
    return labels;
}

inline std::string serialize_labels(std::span<const Label> labels) {
    std::string out;
    for (auto l : labels) {
        out += to_string(l);
        out += '\n';
    }
    return out;
}

inline std::vector<LabeledEvent> attach_labels(std::span<const Event> events,
                                               std::span<const Label> labels) {
    if (events.size() != labels.size()) {
        throw Error("label sidecar has " + std::to_string(labels.size()) + " entries for " +
                    std::to_string(events.size()) + " events");
    }
    std::vector<LabeledEvent> out(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) out[i] = {events[i], labels[i]};
    return out;
}

}  // namespace efr
