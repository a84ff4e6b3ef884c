#pragma once

// Run configuration, presets and file output for the command-line tool.
//
// Configuration files are JSON with quantities in MHz and ns. Every key of
// the resolved configuration is emitted, so a dumped file reloads exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsetls/fitkit.hpp"
#include "pulsetls/spectra.hpp"
#include "pulsetls/tracemodel.hpp"

namespace pulsetls::cli {

using json = nlohmann::ordered_json;

struct WindowConfig {
    std::string name;
    std::string label = "custom";
    double start_ns = 0.0;
    double end_ns = 0.0;

    bool operator==(const WindowConfig&) const = default;
};

struct RunConfig {
    std::string preset = "default";

    double lifetime_ns = 12.3;
    std::optional<double> dark_decay_ns;

    int n_pulses = 12;
    double tau_ns = 10.0;
    double envelope_fwhm_ns = 1.6;
    double angle_pi = 1.0;
    double first_center_ns = 0.0;

    double delta0_mhz = 0.0;
    double fwhm_mhz = 30.0;
    int realizations = 200;
    std::uint64_t seed = 1;
    std::string mode = "monte_carlo";
    int quadrature_order = 21;
    bool normalize = true;

    double horizon_ns = 0.0;  // 0: N tau
    double theta_step_ns = 0.0;  // 0: tau / 100
    double t_step_ns = 0.0;
    double t_begin_ns = 0.0;

    double span_factor = 1.5;  // > 0: frequencies span +-span_factor / tau
    double f_min_mhz = -150.0;
    double f_max_mhz = 150.0;
    int f_points = 401;

    double probe_rabi_gamma = 0.02;  // probe Rabi amplitude in units of the decay rate
    double probe_detuning_mhz = 0.0;
    double probe_turn_on_ns = 0.0;
    int phase_samples = 4;
    std::vector<WindowConfig> windows;
    double scan_min_mhz = -150.0;
    double scan_max_mhz = 150.0;
    int scan_points = 121;
    double trace_end_ns = 0.0;  // 0: end of the last window or pulse

    std::string out_dir = ".";
    std::string prefix = "run";
    bool svg = false;
    unsigned threads = 0;  // 0: hardware concurrency

    bool operator==(const RunConfig&) const = default;
};

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"default", "fig1c", "figS1", "fig2", "fig5", "lifetime"};
    return names;
}

inline RunConfig preset_config(const std::string& name)
{
    RunConfig c;
    c.preset = name;
    c.prefix = name;
    if (name == "default")
        return c;
    if (name == "fig1c" || name == "figS1") {
        c.n_pulses = 12;
        c.tau_ns = 5.0;
        c.fwhm_mhz = name == "fig1c" ? 30.0 : 107.0;
        return c;
    }
    if (name == "fig2" || name == "fig5") {
        const bool f2 = name == "fig2";
        c.n_pulses = f2 ? 21 : 5;
        c.tau_ns = 10.0;
        c.fwhm_mhz = 104.0;
        c.first_center_ns = 0.5 * c.tau_ns;
        const auto centre = [&](int k) { return c.first_center_ns + k * c.tau_ns; };
        if (f2) {
            c.probe_turn_on_ns = centre(10) + 0.5 * c.tau_ns;
            const double last = centre(c.n_pulses - 1);
            c.windows = {{"controlled", "controlled", c.probe_turn_on_ns, last},
                         {"uncontrolled", "uncontrolled", last + 60.0, last + 360.0}};
        } else {
            c.probe_turn_on_ns = 0.0;
            for (int k = 1; k < c.n_pulses; ++k)
                c.windows.push_back({"pulses_" + std::to_string(k), "controlled", centre(0), centre(k)});
        }
        return c;
    }
    if (name == "lifetime") {
        c.n_pulses = 1;
        c.fwhm_mhz = 0.0;
        c.horizon_ns = 400.0;
        c.theta_step_ns = 0.1;
        c.span_factor = 0.0;
        c.f_min_mhz = -60.0;
        c.f_max_mhz = 60.0;
        c.f_points = 241;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

// ---- JSON ------------------------------------------------------------------

inline json to_json(const RunConfig& c)
{
    json windows = json::array();
    for (const auto& w : c.windows)
        windows.push_back({{"name", w.name}, {"label", w.label}, {"start_ns", w.start_ns}, {"end_ns", w.end_ns}});
    return {
        {"preset", c.preset},
        {"emitter",
         {{"lifetime_ns", c.lifetime_ns},
          {"dark_decay_ns", c.dark_decay_ns ? json(*c.dark_decay_ns) : json(nullptr)}}},
        {"pulses",
         {{"n_pulses", c.n_pulses},
          {"interpulse_delay_ns", c.tau_ns},
          {"envelope_fwhm_ns", c.envelope_fwhm_ns},
          {"rotation_angle_pi", c.angle_pi},
          {"first_center_ns", c.first_center_ns}}},
        {"ensemble",
         {{"mean_detuning_mhz", c.delta0_mhz},
          {"fwhm_mhz", c.fwhm_mhz},
          {"n_realizations", c.realizations},
          {"seed", c.seed},
          {"mode", c.mode},
          {"quadrature_order", c.quadrature_order},
          {"normalize", c.normalize}}},
        {"grid",
         {{"horizon_ns", c.horizon_ns},
          {"theta_step_ns", c.theta_step_ns},
          {"t_step_ns", c.t_step_ns},
          {"t_begin_ns", c.t_begin_ns}}},
        {"frequencies",
         {{"span_factor", c.span_factor}, {"min_mhz", c.f_min_mhz}, {"max_mhz", c.f_max_mhz}, {"points", c.f_points}}},
        {"probe",
         {{"rabi_gamma", c.probe_rabi_gamma},
          {"detuning_mhz", c.probe_detuning_mhz},
          {"turn_on_ns", c.probe_turn_on_ns},
          {"phase_samples", c.phase_samples}}},
        {"windows", windows},
        {"scan", {{"min_mhz", c.scan_min_mhz}, {"max_mhz", c.scan_max_mhz}, {"points", c.scan_points}}},
        {"trace", {{"end_ns", c.trace_end_ns}}},
        {"output", {{"directory", c.out_dir}, {"prefix", c.prefix}, {"svg", c.svg}}},
        {"threads", c.threads},
    };
}

namespace detail {

// Reads known keys from one object and rejects the rest.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("config: '" + path_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& v)
    {
        if (!j_.contains(key))
            return;
        used_.insert(key);
        try {
            v = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: '" + path_ + key + "' has the wrong type");
        }
    }

    void get_optional(const char* key, std::optional<double>& v)
    {
        if (!j_.contains(key))
            return;
        used_.insert(key);
        if (j_.at(key).is_null()) {
            v.reset();
            return;
        }
        if (!j_.at(key).is_number())
            throw ConfigError("config: '" + path_ + key + "' must be a number or null");
        v = j_.at(key).get<double>();
    }

    Section sub(const char* key)
    {
        used_.insert(key);
        return Section(j_.at(key), path_ + key + ".");
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key)
    {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const
    {
        for (const auto& item : j_.items())
            if (!used_.count(item.key()))
                throw ConfigError("config: unknown key '" + path_ + item.key() + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Overlays `j` on `base`; keys absent from `j` keep their base values.
inline RunConfig from_json(const json& j, RunConfig base = {})
{
    RunConfig c = std::move(base);
    detail::Section top(j, "");
    top.get("preset", c.preset);
    if (top.has("emitter")) {
        auto s = top.sub("emitter");
        s.get("lifetime_ns", c.lifetime_ns);
        s.get_optional("dark_decay_ns", c.dark_decay_ns);
        s.finish();
    }
    if (top.has("pulses")) {
        auto s = top.sub("pulses");
        s.get("n_pulses", c.n_pulses);
        s.get("interpulse_delay_ns", c.tau_ns);
        s.get("envelope_fwhm_ns", c.envelope_fwhm_ns);
        s.get("rotation_angle_pi", c.angle_pi);
        s.get("first_center_ns", c.first_center_ns);
        s.finish();
    }
    if (top.has("ensemble")) {
        auto s = top.sub("ensemble");
        s.get("mean_detuning_mhz", c.delta0_mhz);
        s.get("fwhm_mhz", c.fwhm_mhz);
        s.get("n_realizations", c.realizations);
        s.get("seed", c.seed);
        s.get("mode", c.mode);
        s.get("quadrature_order", c.quadrature_order);
        s.get("normalize", c.normalize);
        s.finish();
    }
    if (top.has("grid")) {
        auto s = top.sub("grid");
        s.get("horizon_ns", c.horizon_ns);
        s.get("theta_step_ns", c.theta_step_ns);
        s.get("t_step_ns", c.t_step_ns);
        s.get("t_begin_ns", c.t_begin_ns);
        s.finish();
    }
    if (top.has("frequencies")) {
        auto s = top.sub("frequencies");
        s.get("span_factor", c.span_factor);
        s.get("min_mhz", c.f_min_mhz);
        s.get("max_mhz", c.f_max_mhz);
        s.get("points", c.f_points);
        s.finish();
    }
    if (top.has("probe")) {
        auto s = top.sub("probe");
        s.get("rabi_gamma", c.probe_rabi_gamma);
        s.get("detuning_mhz", c.probe_detuning_mhz);
        s.get("turn_on_ns", c.probe_turn_on_ns);
        s.get("phase_samples", c.phase_samples);
        s.finish();
    }
    if (top.has("windows")) {
        const json& arr = top.raw("windows");
        if (!arr.is_array())
            throw ConfigError("config: 'windows' must be an array");
        c.windows.clear();
        for (const auto& item : arr) {
            WindowConfig w;
            detail::Section s(item, "windows[].");
            s.get("name", w.name);
            s.get("label", w.label);
            s.get("start_ns", w.start_ns);
            s.get("end_ns", w.end_ns);
            s.finish();
            c.windows.push_back(w);
        }
    }
    if (top.has("scan")) {
        auto s = top.sub("scan");
        s.get("min_mhz", c.scan_min_mhz);
        s.get("max_mhz", c.scan_max_mhz);
        s.get("points", c.scan_points);
        s.finish();
    }
    if (top.has("trace")) {
        auto s = top.sub("trace");
        s.get("end_ns", c.trace_end_ns);
        s.finish();
    }
    if (top.has("output")) {
        auto s = top.sub("output");
        s.get("directory", c.out_dir);
        s.get("prefix", c.prefix);
        s.get("svg", c.svg);
        s.finish();
    }
    top.get("threads", c.threads);
    top.finish();
    return c;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {})
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j, std::move(base));
}

// ---- resolution to library types -------------------------------------------

inline WindowLabel parse_label(const std::string& s)
{
    if (s == "controlled")
        return WindowLabel::controlled;
    if (s == "uncontrolled")
        return WindowLabel::uncontrolled;
    if (s == "custom")
        return WindowLabel::custom;
    throw ConfigError("unknown window label '" + s + "'");
}

inline EnsembleMode parse_mode(const std::string& s)
{
    if (s == "monte_carlo")
        return EnsembleMode::monte_carlo;
    if (s == "gauss_hermite")
        return EnsembleMode::gauss_hermite;
    throw ConfigError("unknown ensemble mode '" + s + "' (monte_carlo | gauss_hermite)");
}

struct Setup {
    PulseSequence seq;
    EmitterParams params;
    DetuningModel model;
    CorrelatorGrid grid;
    std::vector<double> freqs;  // Hz
    SpectrumOptions spectrum_options;
    ProbeField probe;
    std::vector<WindowSpec> windows;
    std::vector<double> scan_freqs;  // Hz
    ProbeScanOptions scan_options;
};

inline Setup resolve(const RunConfig& c)
{
    Setup s;
    if (!(c.lifetime_ns > 0.0))
        throw ConfigError("lifetime must be positive");
    s.params.decay_rate = 1.0 / units::ns_to_sec(c.lifetime_ns);
    if (c.dark_decay_ns)
        s.params.dark_decay_time = units::ns_to_sec(*c.dark_decay_ns);
    s.params.validate();

    s.seq.n_pulses = c.n_pulses;
    s.seq.interpulse_delay = units::ns_to_sec(c.tau_ns);
    s.seq.envelope_fwhm = units::ns_to_sec(c.envelope_fwhm_ns);
    s.seq.rotation_angle = c.angle_pi * std::numbers::pi;
    s.seq.first_center = units::ns_to_sec(c.first_center_ns);
    if (!(c.tau_ns > 0.0))
        throw ConfigError("interpulse delay must be positive");
    s.seq.validate();

    if (c.fwhm_mhz < 0.0)
        throw ConfigError("ensemble FWHM must be non-negative");
    if (c.realizations < 1)
        throw ConfigError("n_realizations must be at least 1");
    s.model.mean = units::mhz_to_rad(c.delta0_mhz);
    s.model.sigma = units::mhz_to_rad(fwhm_to_sigma(c.fwhm_mhz));
    s.model.n_realizations = c.realizations;
    s.model.seed = c.seed;
    s.model.validate();

    s.grid = CorrelatorGrid::defaults_for(s.seq);
    if (c.horizon_ns > 0.0)
        s.grid.horizon = units::ns_to_sec(c.horizon_ns);
    if (c.theta_step_ns > 0.0) {
        s.grid.theta_step = units::ns_to_sec(c.theta_step_ns);
        s.grid.t_step = s.grid.theta_step;
    }
    if (c.t_step_ns > 0.0)
        s.grid.t_step = units::ns_to_sec(c.t_step_ns);
    s.grid.t_begin = units::ns_to_sec(c.t_begin_ns);

    if (c.f_points < 2)
        throw ConfigError("need at least two frequencies");
    if (c.span_factor > 0.0) {
        s.freqs = default_frequencies(s.seq.interpulse_delay, static_cast<std::size_t>(c.f_points), c.span_factor);
    } else {
        if (!(c.f_max_mhz > c.f_min_mhz))
            throw ConfigError("frequency range must have max > min");
        s.freqs = linspace(c.f_min_mhz * 1e6, c.f_max_mhz * 1e6, static_cast<std::size_t>(c.f_points));
    }
    double f_max = 0.0;
    for (double f : s.freqs)
        f_max = std::max(f_max, std::abs(f));
    s.grid.validate(f_max);

    s.spectrum_options.mode = parse_mode(c.mode);
    if (c.quadrature_order < 1)
        throw ConfigError("quadrature order must be at least 1");
    s.spectrum_options.quadrature_order = c.quadrature_order;
    s.spectrum_options.threads = c.threads > 0 ? c.threads : default_threads();
    s.spectrum_options.normalize = c.normalize;

    s.probe.rabi_amplitude = c.probe_rabi_gamma * s.params.decay_rate;
    s.probe.detuning_from_carrier = units::mhz_to_rad(c.probe_detuning_mhz);
    s.probe.turn_on_time = units::ns_to_sec(c.probe_turn_on_ns);
    s.probe.validate();
    for (const auto& w : c.windows) {
        WindowSpec spec{units::ns_to_sec(w.start_ns), units::ns_to_sec(w.end_ns), parse_label(w.label), w.name};
        if (w.name.empty())
            throw ConfigError("every window needs a name");
        spec.validate();
        s.windows.push_back(spec);
    }
    if (c.scan_points < 1 || (c.scan_points > 1 && !(c.scan_max_mhz > c.scan_min_mhz)))
        throw ConfigError("probe scan needs points >= 1 and max > min");
    s.scan_freqs = linspace(c.scan_min_mhz * 1e6, c.scan_max_mhz * 1e6, static_cast<std::size_t>(c.scan_points));
    s.scan_options.mode = s.spectrum_options.mode;
    s.scan_options.quadrature_order = c.quadrature_order;
    s.scan_options.threads = s.spectrum_options.threads;
    s.scan_options.phase_samples = c.phase_samples;
    s.scan_options.t_end = units::ns_to_sec(c.trace_end_ns);
    return s;
}

// ---- output ----------------------------------------------------------------

/// Locale-independent decimal text with 9 significant digits.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, r.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size())
    {
        row_text(header);
    }

    void row(const std::vector<double>& values)
    {
        std::vector<std::string> t;
        for (double v : values)
            t.push_back(format_number(v));
        row_text(t);
    }

    void row_text(const std::vector<std::string>& cells)
    {
        if (cells.size() != cols_)
            throw ConfigError("csv: row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    std::size_t cols_;
    std::ostringstream out_;
};

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write '" + path + "'");
    f << text;
    if (!f)
        throw ConfigError("failed writing '" + path + "'");
}

inline std::string output_path(const RunConfig& c, const std::string& stem, const std::string& ext)
{
    std::string dir = c.out_dir.empty() ? "." : c.out_dir;
    if (dir.back() != '/')
        dir += '/';
    return dir + c.prefix + "_" + stem + "." + ext;
}

inline std::string spectrum_csv(const Spectrum& s)
{
    CsvWriter w({"freq_mhz", "p1", "p2", "q", "q_stderr"});
    for (std::size_t i = 0; i < s.frequencies.size(); ++i)
        w.row({s.frequencies[i] / 1e6, s.p1[i], s.p2[i], s.q[i], s.stderr_q[i]});
    return w.str();
}

inline std::string probe_curve_csv(const ProbeCurve& c)
{
    CsvWriter w({"freq_mhz", "signal", "change", "change_stderr"});
    for (std::size_t i = 0; i < c.frequencies.size(); ++i)
        w.row({c.frequencies[i] / 1e6, c.signal[i], c.change[i], c.stderr_change[i]});
    return w.str();
}

inline std::string trace_csv(const Trace& t)
{
    CsvWriter w({"time_ns", "signal"});
    for (std::size_t i = 0; i < t.times.size(); ++i)
        w.row({units::sec_to_ns(t.times[i]), t.signal[i]});
    return w.str();
}

struct Series {
    std::string name;
    std::vector<double> x, y;
};

/// Minimal line plot: frame, min/max labels, traces and vertical guides.
inline std::string svg_plot(const std::string& title, const std::string& x_label, const std::vector<Series>& series,
                            const std::vector<double>& guides = {})
{
    const double W = 800, H = 500, L = 70, R = 20, T = 40, B = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i])) {
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
    if (!(x1 > x0)) {
        x0 = 0;
        x1 = 1;
    }
    if (!(y1 > y0)) {
        y0 -= 1;
        y1 += 1;
    }
    const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n"
      << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double g : guides)
        if (g >= x0 && g <= x1)
            o << "<line x1=\"" << px(g) << "\" y1=\"" << T << "\" x2=\"" << px(g) << "\" y2=\"" << H - B
              << "\" stroke=\"#999\" stroke-dasharray=\"4,4\"/>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[k % 6] << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i]))
                o << format_number(px(s.x[i])) << ',' << format_number(py(s.y[i])) << ' ';
        o << "\"/>\n<text x=\"" << W - R - 10 << "\" y=\"" << T + 18 * (k + 1) << "\" text-anchor=\"end\" fill=\""
          << colors[k % 6] << "\">" << s.name << "</text>\n";
    }
    o << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\">" << format_number(x0) << "</text>\n"
      << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"end\">" << format_number(x1)
      << "</text>\n"
      << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_label
      << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << format_number(y0) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << T + 12 << "\" text-anchor=\"end\">" << format_number(y1)
      << "</text>\n</svg>\n";
    return o.str();
}

inline std::vector<double> satellite_guides_mhz(double tau_ns, double f_max_mhz)
{
    std::vector<double> g{0.0};
    const double s = 1e3 / (2.0 * tau_ns);
    for (int n = 1; n * s <= f_max_mhz; ++n) {
        g.push_back(n * s);
        g.push_back(-n * s);
    }
    return g;
}

// ---- commands --------------------------------------------------------------

inline Spectrum run_spectrum(const RunConfig& c)
{
    const Setup s = resolve(c);
    auto spec = ensemble_spectrum(s.model, s.seq, s.params, s.grid, s.freqs, s.spectrum_options);
    write_file(output_path(c, "spectrum", "csv"), spectrum_csv(spec));
    if (c.svg) {
        std::vector<double> f(spec.frequencies.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] = spec.frequencies[i] / 1e6;
        write_file(output_path(c, "spectrum", "svg"),
                   svg_plot(c.prefix + " spectrum", "detuning from carrier (MHz)",
                            {{"P1", f, spec.p1}, {"P2", f, spec.p2}, {"Q", f, spec.q}},
                            satellite_guides_mhz(c.tau_ns, std::max(std::abs(f.front()), std::abs(f.back())))));
    }
    return spec;
}

enum class SweepAxis { tau, delta0, n_pulses, angle };

inline SweepAxis parse_axis(const std::string& s)
{
    if (s == "tau")
        return SweepAxis::tau;
    if (s == "delta0")
        return SweepAxis::delta0;
    if (s == "n_pulses")
        return SweepAxis::n_pulses;
    if (s == "angle")
        return SweepAxis::angle;
    throw ConfigError("unknown sweep axis '" + s + "' (tau | delta0 | n_pulses | angle)");
}

/// One summary row of a sweep: the carrier feature and satellites of Q.
struct SweepRow {
    double value = 0.0;
    CarrierFeature carrier;
    double spacing_mhz = NAN;  // mean |centre| / |order| over fitted satellites
    double satellite_mhz[4] = {NAN, NAN, NAN, NAN};  // orders -2, -1, +1, +2
};

inline SweepRow summarize(double value, const Spectrum& s, double tau)
{
    SweepRow row;
    row.value = value;
    row.carrier = carrier_feature(s.frequencies, s.q, tau, s.stderr_q);
    const auto sat = fit_satellites(s.frequencies, s.q, tau, 3);
    double acc = 0.0;
    int n = 0;
    for (const auto& x : sat.satellites) {
        acc += std::abs(x.center) / std::abs(x.order) / 1e6;
        ++n;
        const int slot = x.order == -2 ? 0 : x.order == -1 ? 1 : x.order == 1 ? 2 : x.order == 2 ? 3 : -1;
        if (slot >= 0 && std::isnan(row.satellite_mhz[slot]))
            row.satellite_mhz[slot] = x.center / 1e6;
    }
    if (n > 0)
        row.spacing_mhz = acc / n;
    return row;
}

inline std::string sweep_summary_csv(const std::vector<SweepRow>& rows)
{
    CsvWriter w({"value", "carrier_extremum", "carrier_q", "dip_fwhm_mhz", "dip_amplitude", "sat_spacing_mhz",
                 "sat_m2_mhz", "sat_m1_mhz", "sat_p1_mhz", "sat_p2_mhz"});
    for (const auto& r : rows)
        w.row({r.value, r.carrier.extremum ? 1.0 : 0.0, r.carrier.value, r.carrier.fwhm_hz / 1e6,
               r.carrier.amplitude, r.spacing_mhz, r.satellite_mhz[0], r.satellite_mhz[1], r.satellite_mhz[2],
               r.satellite_mhz[3]});
    return w.str();
}

inline RunConfig with_value(RunConfig c, SweepAxis axis, double v)
{
    switch (axis) {
    case SweepAxis::tau: c.tau_ns = v; break;
    case SweepAxis::delta0: c.delta0_mhz = v; break;
    case SweepAxis::n_pulses:
        if (v != std::round(v) || v < 1)
            throw ConfigError("n_pulses sweep values must be positive integers");
        c.n_pulses = static_cast<int>(v);
        break;
    case SweepAxis::angle: c.angle_pi = v; break;
    }
    return c;
}

inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis_name,
                                       const std::vector<double>& values)
{
    if (values.empty())
        throw ConfigError("sweep needs at least one value");
    const SweepAxis axis = parse_axis(axis_name);
    for (double v : values)
        resolve(with_value(base, axis, v));
    std::vector<SweepRow> rows;
    for (double v : values) {
        RunConfig c = with_value(base, axis, v);
        c.prefix = base.prefix + "_" + axis_name + "_" + format_number(v);
        const Spectrum s = run_spectrum(c);
        rows.push_back(summarize(v, s, units::ns_to_sec(c.tau_ns)));
    }
    RunConfig out = base;
    out.prefix = base.prefix + "_" + axis_name;
    write_file(output_path(out, "summary", "csv"), sweep_summary_csv(rows));
    return rows;
}

struct TraceRun {
    Trace trace;
    std::vector<ProbeCurve> curves;
};

inline TraceRun run_trace(const RunConfig& c)
{
    const Setup s = resolve(c);
    double t_end = s.scan_options.t_end;
    for (const auto& w : s.windows)
        t_end = std::max(t_end, w.end);
    t_end = std::max(t_end, s.seq.center(s.seq.n_pulses - 1) + s.seq.support() + s.seq.interpulse_delay);
    TraceRun run;
    run.trace = simulate_trace(s.seq, s.probe, s.model.mean, s.params, trace_grid(s.seq, t_end));
    write_file(output_path(c, "trace", "csv"), trace_csv(run.trace));
    if (!s.windows.empty()) {
        run.curves = probe_scan(s.seq, s.probe, s.model, s.params, s.scan_freqs, s.windows, s.scan_options);
        for (const auto& curve : run.curves) {
            write_file(output_path(c, curve.window.name, "csv"), probe_curve_csv(curve));
            if (c.svg) {
                std::vector<double> f(curve.frequencies.size());
                for (std::size_t i = 0; i < f.size(); ++i)
                    f[i] = curve.frequencies[i] / 1e6;
                write_file(output_path(c, curve.window.name, "svg"),
                           svg_plot(c.prefix + " " + curve.window.name, "probe detuning (MHz)",
                                    {{"change", f, curve.change}},
                                    satellite_guides_mhz(c.tau_ns, std::max(std::abs(f.front()), std::abs(f.back())))));
            }
        }
    }
    if (c.svg) {
        std::vector<double> t(run.trace.times.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = units::sec_to_ns(run.trace.times[i]);
        write_file(output_path(c, "trace", "svg"), svg_plot(c.prefix + " trace", "time (ns)",
                                                            {{"signal", t, run.trace.signal}}));
    }
    return run;
}

// ---- calibration -----------------------------------------------------------

struct Calibration {
    double peak_amplitude = 0.0;     // rad/s
    double pi_amplitude = 0.0;       // rad/s for a pi rotation, where the sweep peaks
    double peak_mhz = 0.0;           // peak / 2 pi in MHz
    double truncation_factor = 0.0;  // peak(truncated) / peak(untruncated)
    std::vector<double> sweep_amplitude;  // rad/s
    std::vector<double> sweep_population;
    FitResult fit;
};

/// Calibrated peak amplitude, and the excited population after one pulse
/// without decay against peak amplitude with a Gaussian fit to locate its
/// maximum.
inline Calibration calibrate(double envelope_fwhm_ns, double angle_pi, int points = 61)
{
    PulseSequence seq;
    seq.n_pulses = 1;
    seq.envelope_fwhm = units::ns_to_sec(envelope_fwhm_ns);
    seq.rotation_angle = angle_pi * std::numbers::pi;
    seq.validate();
    if (points < 5)
        throw ConfigError("calibration sweep needs at least five points");
    Calibration cal;
    cal.peak_amplitude = calibrate_pulse_amplitude(seq.envelope_fwhm, seq.rotation_angle, seq.support());
    cal.peak_mhz = cal.peak_amplitude / units::two_pi / 1e6;
    cal.truncation_factor =
        cal.peak_amplitude / calibrate_pulse_amplitude(seq.envelope_fwhm, seq.rotation_angle, INFINITY);

    EmitterParams params;
    params.decay_rate = 0.0;
    seq.first_center = seq.support();
    const TimeGrid grid{0.0, 2.0 * seq.support(), seq.envelope_fwhm / 40.0, seq.envelope_fwhm / 40.0};
    cal.pi_amplitude = cal.peak_amplitude / angle_pi;
    cal.sweep_amplitude =
        linspace(0.5 * cal.pi_amplitude, 1.5 * cal.pi_amplitude, static_cast<std::size_t>(points));
    for (double a : cal.sweep_amplitude) {
        PulseSequence s = seq;
        s.peak_amplitude = a;
        const auto traj = evolve(DensityMatrix::ground(), grid, 0.0, PulseTrain(s), params);
        cal.sweep_population.push_back(traj.states.back().rho_ee());
    }
    std::vector<double> x(cal.sweep_amplitude.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = cal.sweep_amplitude[i] / cal.pi_amplitude;
    cal.fit = fit(ModelSpec::gaussian(), x, cal.sweep_population, {1.0, 1.0, 1.0, 0.0});
    cal.fit.params[1] *= cal.pi_amplitude;
    cal.fit.params[2] *= cal.pi_amplitude;
    return cal;
}

// ---- fit reports -----------------------------------------------------------

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return columns[i];
        throw ConfigError("csv: no column named '" + name + "'");
    }
};

inline CsvData read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open data file '" + path + "'");
    CsvData d;
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("data file '" + path + "' is empty");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            d.header.push_back(cell);
    }
    d.columns.resize(d.header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col >= d.header.size())
                throw ConfigError("data row " + std::to_string(row) + " has too many cells");
            double v = 0.0;
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (r.ec != std::errc() && cell != "nan")
                throw ConfigError("data row " + std::to_string(row) + ": cannot parse '" + cell + "'");
            d.columns[col++].push_back(cell == "nan" ? NAN : v);
        }
        if (col != d.header.size())
            throw ConfigError("data row " + std::to_string(row) + " has too few cells");
    }
    if (d.columns.empty() || d.columns[0].empty())
        throw ConfigError("data file has no rows");
    return d;
}

inline ModelSpec parse_model(const std::string& name, int peaks)
{
    if (name == "lorentzian_sum")
        return ModelSpec::lorentzian_sum(peaks);
    if (name == "pseudo_voigt")
        return ModelSpec::pseudo_voigt();
    if (name == "gaussian")
        return ModelSpec::gaussian();
    if (name == "exponential")
        return ModelSpec::exponential();
    if (name == "bi_exponential")
        return ModelSpec::bi_exponential();
    throw ConfigError("unknown model '" + name +
                      "' (lorentzian_sum | pseudo_voigt | gaussian | exponential | bi_exponential)");
}

inline json fit_report_json(const ModelSpec& spec, const FitResult& r, double x_unit_hz, double tau)
{
    json params = json::object();
    const auto names = spec.parameter_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        params[names[i]] = {{"value", r.params[i]}, {"sigma", r.sigma(i)}};
    json j{{"model", to_string(spec.kind)},
           {"converged", r.converged},
           {"message", r.message},
           {"iterations", r.iterations},
           {"residual_norm", r.residual_norm},
           {"parameters", params}};
    bool valid = true;
    try {
        spec.check(r.params);
    } catch (const ConfigError&) {
        valid = false;
    }
    if (valid && (spec.kind == ModelKind::lorentzian_sum || spec.kind == ModelKind::pseudo_voigt ||
                  spec.kind == ModelKind::gaussian)) {
        json lw = json::array();
        for (const auto& l : linewidth_report(spec, r, x_unit_hz))
            lw.push_back({{"component", l.component}, {"fwhm_mhz", l.fwhm_mhz}, {"sigma_mhz", l.sigma_mhz}});
        j["linewidths"] = lw;
    }
    if (valid && spec.kind == ModelKind::lorentzian_sum && tau > 0.0) {
        json sats = json::array();
        for (const auto& s : extract_satellites(r, tau, x_unit_hz))
            sats.push_back({{"order", s.order},
                            {"center_mhz", s.center / 1e6},
                            {"predicted_mhz", s.predicted / 1e6},
                            {"residual_mhz", s.residual / 1e6},
                            {"amplitude", s.amplitude}});
        j["satellites"] = sats;
    }
    return j;
}

inline std::string fit_report_text(const json& j)
{
    std::ostringstream o;
    o << "model: " << j["model"].get<std::string>() << "\n"
      << "converged: " << (j["converged"].get<bool>() ? "yes" : "no") << " (" << j["message"].get<std::string>()
      << ", " << j["iterations"].get<int>() << " iterations)\n"
      << "residual norm: " << format_number(j["residual_norm"].get<double>()) << "\n";
    for (const auto& [name, v] : j["parameters"].items())
        o << "  " << name << " = " << format_number(v["value"].get<double>()) << " +- "
          << format_number(v["sigma"].get<double>()) << "\n";
    if (j.contains("linewidths"))
        for (const auto& l : j["linewidths"])
            o << "FWHM " << l["component"].get<std::string>() << ": " << format_number(l["fwhm_mhz"].get<double>())
              << " +- " << format_number(l["sigma_mhz"].get<double>()) << " MHz\n";
    if (j.contains("satellites")) {
        o << "order  center_mhz  predicted_mhz  residual_mhz\n";
        for (const auto& s : j["satellites"])
            o << s["order"].get<int>() << "  " << format_number(s["center_mhz"].get<double>()) << "  "
              << format_number(s["predicted_mhz"].get<double>()) << "  "
              << format_number(s["residual_mhz"].get<double>()) << "\n";
    }
    return o.str();
}

}  // namespace pulsetls::cli
