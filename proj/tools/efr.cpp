// efr: synthesize, filter and analyze event streams.

#include <efr/efr.hpp>

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

/// Bad flags or arguments.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum Exit { ok = 0, usage = 1, data = 2 };

struct FilterFlags {
    double base_freq = 50.0;
    double rho1 = 0.6;
    std::optional<double> rho2;
    std::optional<double> tau1;
    std::optional<double> tau2;
    double contrast = 1.0;
    std::optional<double> theta;
    double prune_epsilon = 1e-9;

    void add_to(CLI::App& app) {
        app.add_option("--base-freq", base_freq, "supply frequency f0 [Hz]")->capture_default_str();
        app.add_option("--rho1", rho1, "feedback gain of the long-lag stage")->capture_default_str();
        app.add_option("--rho2", rho2, "feedforward gain of the short-lag stage (default 1 - (1 - rho1) / 10)");
        app.add_option("--tau1", tau1, "long lag [s] (default 1 / f0)");
        app.add_option("--tau2", tau2, "short lag [s] (default tau1 / 10)");
        app.add_option("--contrast", contrast, "contrast threshold c")->capture_default_str();
        app.add_option("--theta", theta, "output sampler threshold (default c)");
        app.add_option("--prune-epsilon", prune_epsilon, "drop scheduled deltas below this times c")
            ->capture_default_str();
    }

    efr::FilterConfig resolve() const {
        auto c = efr::FilterConfig::for_base_frequency(base_freq, rho1, contrast);
        if (tau1) {
            c.tau1 = *tau1;
            c.tau2 = *tau1 / 10.0;
        }
        if (tau2) c.tau2 = *tau2;
        if (rho2) c.rho2 = *rho2;
        if (theta) c.sampler_threshold = *theta;
        c.prune_epsilon = prune_epsilon;
        try {
            c.validate();
        } catch (const efr::ConfigError& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

struct GeometryFlags {
    std::optional<std::uint32_t> width;
    std::optional<std::uint32_t> height;

    void add_to(CLI::App& app) {
        app.add_option("--width", width, "sensor width (default: from the events)");
        app.add_option("--height", height, "sensor height (default: from the events)");
    }

    std::optional<efr::SensorGeometry> given() const {
        if (!width && !height) return std::nullopt;
        if (!width || !height) throw UsageError("--width and --height go together");
        efr::SensorGeometry g{*width, *height};
        try {
            g.validate();
        } catch (const efr::Error& e) {
            throw UsageError(e.what());
        }
        return g;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw efr::Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw efr::Error("cannot write " + path);
    return out;
}

void check_distinct(const std::string& output, const std::vector<std::string>& inputs) {
    std::error_code ec;
    for (const auto& in : inputs) {
        if (in.empty()) continue;
        const bool same = fs::exists(output) && fs::exists(in) ? fs::equivalent(output, in, ec)
                                                               : fs::weakly_canonical(output, ec) ==
                                                                     fs::weakly_canonical(in, ec);
        if (same) throw UsageError("output path " + output + " is also an input");
    }
}

struct Region {
    efr::PixelRect rect;
};

std::istream& operator>>(std::istream& is, Region& r) {
    std::string s;
    is >> s;
    for (auto& ch : s) {
        if (ch == ',') ch = ' ';
    }
    std::istringstream parts(s);
    std::string rest;
    if (!(parts >> r.rect.x >> r.rect.y >> r.rect.width >> r.rect.height) || (parts >> rest)) {
        is.setstate(std::ios::failbit);
    }
    return is;
}

std::string header(const std::string& command, const std::vector<std::string>& lines) {
    std::string h = "# efr " + command + '\n';
    for (const auto& l : lines) h += "# " + l + '\n';
    return h;
}

/// Events from a file, rejecting globally unsorted streams with the line number.
efr::ParsedStream load_events(const std::string& path, const std::optional<efr::SensorGeometry>& geometry) {
    auto parsed = efr::parse_stream(read_file(path), geometry);
    const auto mono = efr::validate_monotone(parsed.events);
    if (!mono.ok) {
        const auto i = *mono.first_violation;
        throw efr::Error(path + ":" + std::to_string(parsed.event_lines[i]) +
                         ": timestamp is earlier than the previous event (line " +
                         std::to_string(parsed.event_lines[i - 1]) + ")");
    }
    return parsed;
}

std::string number(double v) {
    std::string s;
    efr::detail::append_double(s, v);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-camera flicker removal"};
    app.require_subcommand(1);

    // filter
    auto* filter = app.add_subcommand("filter", "run the comb filter on an event file");
    std::string filter_in, filter_out;
    FilterFlags filter_cfg;
    GeometryFlags filter_geom;
    std::optional<double> drain;
    std::optional<double> end_time;
    unsigned workers = 1;
    filter->add_option("input", filter_in, "event file")->required();
    filter->add_option("output", filter_out, "filtered event file")->required();
    filter_cfg.add_to(*filter);
    filter_geom.add_to(*filter);
    filter->add_option("--drain", drain, "seconds simulated past the last input event (default 5 tau1)");
    filter->add_option("--end-time", end_time, "absolute end of simulation [s]");
    filter->add_option("--workers", workers, "pixel shards processed in parallel")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic flicker scene");
    std::string scene_file, synth_out, labels_out;
    bool use_default = false;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    synth->add_option("output", synth_out, "event file")->required();
    auto* scene_opt = synth->add_option("--scene", scene_file, "scene description file");
    auto* default_opt = synth->add_flag("--default", use_default, "use the built-in default scene");
    scene_opt->excludes(default_opt);
    synth->add_option("--seed", seed, "random seed");
    synth->add_option("--duration", duration, "scene duration [s]");
    synth->add_option("--labels", labels_out, "label sidecar path (default OUTPUT.labels)");

    // bode
    auto* bode = app.add_subcommand("bode", "tabulate the filter frequency response");
    std::string bode_out;
    FilterFlags bode_cfg;
    double fmin = 1.0, fmax = 1000.0;
    unsigned ppd = 200;
    bode->add_option("output", bode_out, "CSV path")->required();
    bode_cfg.add_to(*bode);
    bode->add_option("--fmin", fmin, "lowest frequency [Hz]")->capture_default_str();
    bode->add_option("--fmax", fmax, "highest frequency [Hz]")->capture_default_str();
    bode->add_option("--ppd", ppd, "points per decade")->capture_default_str();

    // psd
    auto* psd_cmd = app.add_subcommand("psd", "power spectral density of a reconstructed patch");
    std::string psd_in, psd_out;
    std::optional<Region> psd_region;
    double rate = 1000.0, psd_tstart = 0.0;
    std::optional<double> psd_tend;
    double psd_contrast = 1.0;
    GeometryFlags psd_geom;
    psd_cmd->add_option("input", psd_in, "event file")->required();
    psd_cmd->add_option("output", psd_out, "CSV path")->required();
    psd_cmd->add_option("--region", psd_region, "patch x,y,w,h (default: whole sensor)");
    psd_cmd->add_option("--rate", rate, "reconstruction rate [Hz]")->capture_default_str();
    psd_cmd->add_option("--tstart", psd_tstart, "window start [s]")->capture_default_str();
    psd_cmd->add_option("--tend", psd_tend, "window end [s] (default: last event)");
    psd_cmd->add_option("--contrast", psd_contrast, "log-intensity step per event")->capture_default_str();
    psd_geom.add_to(*psd_cmd);

    // heatmap
    auto* heat = app.add_subcommand("heatmap", "per-pixel event rate over a window");
    std::string heat_in, heat_out;
    double heat_tstart = 0.0, heat_window = 0.03;
    GeometryFlags heat_geom;
    heat->add_option("input", heat_in, "event file")->required();
    heat->add_option("output", heat_out, "output path; .pgm writes an image, anything else CSV")->required();
    heat->add_option("--tstart", heat_tstart, "window start [s]")->capture_default_str();
    heat->add_option("--window", heat_window, "window length [s]")->capture_default_str();
    heat_geom.add_to(*heat);

    // snr
    auto* snr_cmd = app.add_subcommand("snr", "foreground / flicker event ratio");
    std::string snr_in, snr_labels;
    std::optional<Region> snr_mask;
    double snr_tstart = 0.0, snr_window = 0.03;
    snr_cmd->add_option("input", snr_in, "event file")->required();
    auto* lab_opt = snr_cmd->add_option("--labels", snr_labels, "label sidecar");
    auto* mask_opt = snr_cmd->add_option("--mask", snr_mask, "flicker region x,y,w,h");
    lab_opt->excludes(mask_opt);
    snr_cmd->add_option("--tstart", snr_tstart, "window start [s]")->capture_default_str();
    snr_cmd->add_option("--window", snr_window, "window length [s]")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::usage;
    }

    try {
        if (*filter) {
            const auto cfg = filter_cfg.resolve();
            const auto geometry = filter_geom.given();
            if (drain && !(*drain >= 0.0)) throw UsageError("--drain must be >= 0");
            check_distinct(filter_out, {filter_in});

            const auto parsed = load_events(filter_in, geometry);
            const auto g = geometry ? *geometry : efr::bounding_geometry(parsed.events);
            efr::FilterOptions opt;
            opt.drain = drain;
            opt.end_time = end_time;
            opt.workers = workers;

            const auto start = std::chrono::steady_clock::now();
            const auto out = efr::filter_stream(parsed.events, g, cfg, opt);
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

            auto os = open_output(filter_out);
            os << header("filter", {cfg.describe(), "width=" + std::to_string(g.width) +
                                                        " height=" + std::to_string(g.height) +
                                                        (drain ? " drain=" + number(*drain) : "") +
                                                        (end_time ? " end_time=" + number(*end_time) : "")});
            os << efr::serialize_stream(out);
            std::printf("input events: %zu\noutput events: %zu\nelapsed: %.3f s\n", parsed.events.size(),
                        out.size(), elapsed.count());
        } else if (*synth) {
            if (!use_default && scene_file.empty()) throw UsageError("synth needs --default or --scene FILE");
            if (labels_out.empty()) labels_out = synth_out + ".labels";
            if (labels_out == synth_out) throw UsageError("label sidecar path equals the event path");
            check_distinct(synth_out, {scene_file});
            check_distinct(labels_out, {scene_file});

            auto scene = efr::default_scene();
            if (!scene_file.empty()) scene = efr::parse_scene(read_file(scene_file));
            if (seed || duration) {
                // Re-derive the default foreground phase for the new seed.
                if (use_default) {
                    scene = efr::default_scene(scene.geometry, duration.value_or(scene.duration),
                                               seed.value_or(scene.seed));
                } else {
                    if (seed) scene.seed = *seed;
                    if (duration) scene.duration = *duration;
                }
            }
            try {
                scene.validate();
            } catch (const efr::Error& e) {
                throw UsageError(e.what());
            }
            const auto gen = efr::generate(scene);
            std::string h = header("synth", {});
            {
                std::istringstream lines(efr::serialize_scene(scene));
                for (std::string l; std::getline(lines, l);) h += "# " + l + '\n';
            }
            auto os = open_output(synth_out);
            os << h << efr::serialize_stream(gen.events);
            auto ls = open_output(labels_out);
            ls << h << efr::serialize_labels(gen.labels);
            std::printf("events: %zu\n", gen.events.size());
        } else if (*bode) {
            const auto cfg = bode_cfg.resolve();
            if (!(fmin > 0.0 && fmin < fmax)) throw UsageError("need 0 < --fmin < --fmax");
            if (ppd == 0) throw UsageError("--ppd must be >= 1");
            const auto rows = efr::bode_table(cfg, fmin, fmax, ppd);
            auto os = open_output(bode_out);
            os << header("bode", {cfg.describe(), "fmin=" + number(fmin) + " fmax=" + number(fmax) +
                                                      " ppd=" + std::to_string(ppd)});
            efr::write_bode_csv(os, rows);
        } else if (*psd_cmd) {
            const auto geometry = psd_geom.given();
            if (!(rate > 0.0)) throw UsageError("--rate must be > 0");
            check_distinct(psd_out, {psd_in});
            const auto parsed = load_events(psd_in, geometry);
            const auto g = geometry ? *geometry : efr::bounding_geometry(parsed.events);
            const auto region = psd_region ? psd_region->rect : efr::PixelRect{0, 0, g.width, g.height};
            const double t_end = psd_tend ? *psd_tend : (parsed.events.empty() ? 0.0 : parsed.events.back().t);
            if (!(t_end > psd_tstart)) throw UsageError("--tend must exceed --tstart");
            const auto signal = efr::reconstruct_zoh(parsed.events, region, rate, psd_tstart, t_end, psd_contrast);
            const auto spectrum = efr::psd(signal, rate, psd_tstart);
            auto os = open_output(psd_out);
            os << header("psd", {"region=" + std::to_string(region.x) + "," + std::to_string(region.y) + "," +
                                     std::to_string(region.width) + "," + std::to_string(region.height) +
                                     " rate=" + number(rate) + " tstart=" + number(psd_tstart) +
                                     " tend=" + number(t_end) + " contrast=" + number(psd_contrast) +
                                     " fft_length=" + std::to_string(spectrum.fft_length) + " taper=" +
                                     spectrum.taper});
            efr::write_psd_csv(os, spectrum);
        } else if (*heat) {
            const auto geometry = heat_geom.given();
            if (!(heat_window > 0.0)) throw UsageError("--window must be > 0");
            check_distinct(heat_out, {heat_in});
            const auto parsed = load_events(heat_in, geometry);
            const auto g = geometry ? *geometry : efr::bounding_geometry(parsed.events);
            const auto map = efr::rate_map(parsed.events, g, heat_tstart, heat_window);
            const std::string info = "tstart=" + number(heat_tstart) + " window=" + number(heat_window) +
                                     " max_rate=" + number(map.max());
            auto os = open_output(heat_out);
            if (fs::path(heat_out).extension() == ".pgm") {
                efr::write_rate_map_pgm(os, map, "efr heatmap " + info);
            } else {
                os << header("heatmap", {info});
                efr::write_rate_map_csv(os, map);
            }
        } else if (*snr_cmd) {
            if (snr_labels.empty() && !snr_mask) throw UsageError("snr needs --labels FILE or --mask x,y,w,h");
            if (!(snr_window > 0.0)) throw UsageError("--window must be > 0");
            const auto parsed = load_events(snr_in, std::nullopt);
            const efr::TimeWindow window{snr_tstart, snr_tstart + snr_window};
            efr::SnrReport report;
            if (snr_mask) {
                report = efr::snr(parsed.events, snr_mask->rect, window);
            } else {
                const auto labels = efr::parse_labels(read_file(snr_labels));
                report = efr::snr(efr::attach_labels(parsed.events, labels), window);
            }
            std::cout << report.to_record() << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "efr: " << e.what() << '\n';
        return Exit::usage;
    } catch (const std::exception& e) {
        std::cerr << "efr: " << e.what() << '\n';
        return Exit::data;
    }
    return Exit::ok;
}
