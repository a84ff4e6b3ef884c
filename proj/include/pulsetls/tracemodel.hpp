#pragma once

// Time-resolved fluorescence under the control pulse train plus a weak probe,
// and probe scans assembled from time-window averages of those traces.
//
// The probe enters the carrier-frame drive as a rotating tone
// W_p exp(-i (d_p t + phi)), so a probe at d_p is resonant with an emitter at
// detuning d_p. Collected signal is proportional to rho_ee, multiplied by an
// exp(-t / T_dark) envelope for pumping into a dark state.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pulsetls/core.hpp"
#include "pulsetls/dynamics.hpp"
#include "pulsetls/ensemble.hpp"

namespace pulsetls {

struct ProbeField {
    double rabi_amplitude = 0.0;         // rad/s
    double detuning_from_carrier = 0.0;  // rad/s
    double turn_on_time = 0.0;           // s
    double phase = 0.0;                  // rad

    void validate() const
    {
        if (!(rabi_amplitude >= 0.0))
            throw ConfigError("probe Rabi amplitude must be non-negative");
    }
};

enum class WindowLabel { controlled, uncontrolled, custom };

inline const char* to_string(WindowLabel l)
{
    switch (l) {
    case WindowLabel::controlled: return "controlled";
    case WindowLabel::uncontrolled: return "uncontrolled";
    case WindowLabel::custom: return "custom";
    }
    return "custom";
}

struct WindowSpec {
    double start = 0.0;  // s
    double end = 0.0;    // s
    WindowLabel label = WindowLabel::custom;
    std::string name;

    void validate() const
    {
        if (!(end > start))
            throw ConfigError("time window must have end > start");
    }
};

/// Pulse train plus rotating probe tone W_p exp(-i (d_p t + phi)), switched on
/// at turn_on_time. In the frame co-rotating with the probe (y_eg = x_eg *
/// frame_phase(t)) the probe is the constant drive probe_on(t) and the
/// emitter detuning becomes delta - d_p.
class TwoToneDrive {
public:
    TwoToneDrive(const PulseTrain& pulses, const ProbeField& probe) : pulses_(&pulses), probe_(probe) {}

    complex rabi(double t) const
    {
        complex w = pulses_->rabi(t);
        if (t >= probe_.turn_on_time)
            w += std::polar(probe_.rabi_amplitude, -(probe_.detuning_from_carrier * t + probe_.phase));
        return w;
    }

    complex rabi_at(double t, double ref) const
    {
        complex w = pulses_->rabi_at(t, ref);
        if (ref >= probe_.turn_on_time)
            w += std::polar(probe_.rabi_amplitude, -(probe_.detuning_from_carrier * t + probe_.phase));
        return w;
    }

    int breaks_in(double a, double b, double* out) const
    {
        int n = pulses_->breaks_in(a, b, out);
        const double t = probe_.turn_on_time;
        if (t > a && t < b && n < 4) {
            out[n++] = t;
            std::sort(out, out + n);
        }
        return n;
    }

    bool fast_in(double a, double b) const { return pulses_->fast_in(a, b); }

    complex probe_on(double t) const
    {
        return t >= probe_.turn_on_time ? complex{probe_.rabi_amplitude} : complex{};
    }

    complex frame_phase(double t) const { return std::polar(1.0, probe_.detuning_from_carrier * t + probe_.phase); }
    double detuning_shift() const { return probe_.detuning_from_carrier; }
    double turn_on_time() const { return probe_.turn_on_time; }

private:
    const PulseTrain* pulses_;
    ProbeField probe_;
};

struct Trace {
    std::vector<double> times;   // s
    std::vector<double> signal;  // rho_ee * exp(-t / T_dark)
    bool weak_probe = true;      // false if the probe is not << the pulse peak
};

/// Time axis for a trace: sequence start (t = 0, ground state) until `t_end`.
inline TimeGrid trace_grid(const PulseSequence& seq, double t_end)
{
    return TimeGrid::defaults_for(seq, 0.0, t_end);
}

namespace detail {

inline double dark_envelope(const EmitterParams& params, double t)
{
    return params.dark_decay_time ? std::exp(-t / *params.dark_decay_time) : 1.0;
}

/// Exact propagator exp(L h) of the generator under a constant drive.
inline Superop constant_drive_map(complex omega, double delta, double gamma, double h)
{
    Eigen::Matrix4cd L;
    for (int col = 0; col < 4; ++col) {
        Operator2 e;
        (col == 0 ? e.ee : col == 1 ? e.gg : col == 2 ? e.eg : e.ge) = 1.0;
        const Operator2 r = apply_generator(e, omega, delta, gamma);
        L(0, col) = r.ee;
        L(1, col) = r.gg;
        L(2, col) = r.eg;
        L(3, col) = r.ge;
    }
    const Eigen::Matrix4cd E = (L * h).exp();
    Superop out;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            out.m[4 * i + j] = E(i, j);
    return out;
}

/// Continues `trace` from node `first_interval`. Intervals with pulse support
/// or the probe switching edge are integrated with RK4 in the carrier frame;
/// the rest apply the exact constant-drive propagator in the probe frame,
/// which makes probe-off results independent of the probe frequency.
inline void extend_trace(Trace& trace, DensityMatrix rho, std::size_t first_interval, const TimeGrid& grid,
                         double delta, const TwoToneDrive& drive, const EmitterParams& params)
{
    const double frame_delta = delta - drive.detuning_shift();
    const double gamma = params.decay_rate;
    const double h0 = grid.base_step;
    const double t_on = drive.turn_on_time();
    const Superop off_map = constant_drive_map(drive.probe_on(-1e300), frame_delta, gamma, h0);
    const Superop on_map = constant_drive_map(drive.probe_on(1e300), frame_delta, gamma, h0);
    const std::size_t n = grid.intervals();
    // y holds the probe-frame operator while `framed`
    bool framed = false;
    Operator2 y;
    for (std::size_t j = first_interval; j < n; ++j) {
        const double a = grid.node(j);
        const double b = grid.node(j + 1);
        const bool edge = a < t_on && t_on < b;
        const bool constant = !drive.fast_in(a, b) && !edge && std::abs((b - a) - h0) < 1e-12 * h0;
        if (constant) {
            if (!framed) {
                y = DensityMatrix{rho.rho_ee(), rho.rho_eg() * drive.frame_phase(a)}.as_operator();
                framed = true;
            }
            y = (a >= t_on ? on_map : off_map)(y);
            rho = DensityMatrix{y.ee.real(), complex{}};
        } else {
            if (framed) {
                const DensityMatrix z = DensityMatrix::from_operator(y);
                rho = DensityMatrix{z.rho_ee(), z.rho_eg() / drive.frame_phase(a)};
                framed = false;
            }
            for_each_substep(a, b, grid, drive, [&](double t, double h, const auto& d) {
                rho = step(rho, t, h, delta, d, params);
            });
        }
        trace.times.push_back(b);
        trace.signal.push_back(rho.rho_ee() * dark_envelope(params, b));
    }
}

}  // namespace detail

/// Fluorescence trace for one static detuning. The sequence starts in |g>;
/// its first pulse prepares |e>. The pulse centres should lie at least one
/// support half-width after t = 0 (see PulseSequence::first_center).
inline Trace simulate_trace(const PulseSequence& seq, const ProbeField& probe, double delta,
                            const EmitterParams& params, const TimeGrid& grid)
{
    params.validate();
    probe.validate();
    grid.validate_for(seq);
    const PulseTrain pulses(seq);
    Trace trace;
    trace.weak_probe = probe.rabi_amplitude < 0.1 * pulses.peak_amplitude();
    trace.times.push_back(grid.t_start);
    trace.signal.push_back(0.0);
    detail::extend_trace(trace, DensityMatrix::ground(), 0, grid, delta, TwoToneDrive(pulses, probe), params);
    return trace;
}

/// Trapezoidal time average of the trace over the window.
inline double window_average(const Trace& trace, const WindowSpec& window)
{
    window.validate();
    if (trace.times.size() < 2)
        throw ConfigError("window_average: empty trace");
    const auto& t = trace.times;
    const auto& y = trace.signal;
    const double tol = 1e-9 * (t.back() - t.front());
    if (window.start < t.front() - tol || window.end > t.back() + tol)
        throw ConfigError("window_average: window lies outside the trace");
    auto value_at = [&](double x) {
        auto it = std::upper_bound(t.begin(), t.end(), x);
        if (it == t.begin())
            return y.front();
        if (it == t.end())
            return y.back();
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double f = (x - t[i - 1]) / (t[i] - t[i - 1]);
        return y[i - 1] + f * (y[i] - y[i - 1]);
    };
    double area = 0.0;
    double prev_t = window.start;
    double prev_y = value_at(window.start);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] <= window.start)
            continue;
        if (t[i] >= window.end)
            break;
        area += 0.5 * (prev_y + y[i]) * (t[i] - prev_t);
        prev_t = t[i];
        prev_y = y[i];
    }
    area += 0.5 * (prev_y + value_at(window.end)) * (window.end - prev_t);
    return area / (window.end - window.start);
}

/// Window-averaged signal against probe detuning for one window. `change`
/// is the probe-induced part (signal minus the probe-off signal of the same
/// realization); its standard error is the Monte-Carlo error of the scan.
struct ProbeCurve {
    WindowSpec window;
    std::vector<double> frequencies;  // Hz, probe detuning from the carrier
    std::vector<double> signal;
    std::vector<double> change;
    std::vector<double> stderr_change;
    /// Per-realization probe-induced change, [realization][frequency]; only
    /// filled when ProbeScanOptions::keep_samples is set.
    std::vector<std::vector<double>> samples;
    std::vector<double> weights;
};

struct ProbeScanOptions {
    EnsembleMode mode = EnsembleMode::monte_carlo;
    int quadrature_order = 21;
    unsigned threads = default_threads();
    /// Probe phases averaged per frequency (equally spaced over 2 pi).
    int phase_samples = 4;
    double t_end = 0.0;  // 0 means end of the last window
    bool keep_samples = false;
};

/// Probe scan: for every probe detuning, traces are averaged over probe
/// phases and over the detuning ensemble, then reduced to one value per
/// window. The pre-probe part of each realization is shared across
/// frequencies.
inline std::vector<ProbeCurve> probe_scan(const PulseSequence& seq, const ProbeField& probe_template,
                                          const DetuningModel& model, const EmitterParams& params,
                                          const std::vector<double>& probe_freqs_hz,
                                          const std::vector<WindowSpec>& windows,
                                          const ProbeScanOptions& opt = {})
{
    model.validate();
    params.validate();
    probe_template.validate();
    if (windows.empty())
        throw ConfigError("probe_scan needs at least one window");
    double t_end = opt.t_end;
    for (const auto& w : windows) {
        w.validate();
        if (w.start < 0.0)
            throw ConfigError("probe_scan windows must start at t >= 0");
        t_end = std::max(t_end, w.end);
    }
    if (opt.phase_samples < 1)
        throw ConfigError("probe_scan needs at least one probe phase");
    const TimeGrid grid = trace_grid(seq, t_end);
    grid.validate_for(seq);
    const PulseTrain pulses(seq);

    std::vector<double> deltas, weights;
    if (opt.mode == EnsembleMode::gauss_hermite) {
        auto rule = gaussian_detuning_nodes(model, opt.quadrature_order);
        deltas = std::move(rule.nodes);
        weights = std::move(rule.weights);
    } else {
        const int n = model.effective_realizations();
        for (int i = 0; i < n; ++i) {
            deltas.push_back(draw_detuning(model, static_cast<std::uint64_t>(i)));
            weights.push_back(1.0 / n);
        }
    }

    // Shared prefix: everything before the node at or below the probe turn-on.
    const std::size_t on_interval = static_cast<std::size_t>(std::max(
        0.0, std::floor((probe_template.turn_on_time - grid.t_start) / grid.base_step + 1e-9)));
    const std::size_t prefix_intervals = std::min(on_interval, grid.intervals());
    struct Prefix {
        Trace trace;
        DensityMatrix state;
        std::vector<double> probe_off;  // per window
    };
    const auto prefixes = parallel_map(deltas.size(), opt.threads, [&](std::size_t r) {
        TimeGrid head = grid;
        head.t_end = grid.node(prefix_intervals);
        Prefix p;
        p.trace.times.push_back(grid.t_start);
        p.trace.signal.push_back(0.0);
        p.state = DensityMatrix::ground();
        if (prefix_intervals > 0) {
            const auto traj = evolve(DensityMatrix::ground(), head, deltas[r], pulses, params);
            for (std::size_t j = 1; j < traj.size(); ++j) {
                p.trace.times.push_back(traj.times[j]);
                p.trace.signal.push_back(traj.states[j].rho_ee() * detail::dark_envelope(params, traj.times[j]));
            }
            p.state = traj.states.back();
        }
        Trace off = p.trace;
        ProbeField silent = probe_template;
        silent.rabi_amplitude = 0.0;
        detail::extend_trace(off, p.state, prefix_intervals, grid, deltas[r], TwoToneDrive(pulses, silent), params);
        for (const auto& w : windows)
            p.probe_off.push_back(window_average(off, w));
        return p;
    });

    const std::size_t nw = windows.size();
    const std::size_t nf = probe_freqs_hz.size();
    const std::size_t nr = deltas.size();
    // values[f][r][w]
    const auto values = parallel_map(nf, opt.threads, [&](std::size_t f) {
        std::vector<double> out(nr * nw, 0.0);
        for (std::size_t r = 0; r < nr; ++r)
            for (int k = 0; k < opt.phase_samples; ++k) {
                ProbeField probe = probe_template;
                probe.detuning_from_carrier = units::hz_to_rad(probe_freqs_hz[f]);
                probe.phase = probe_template.phase + units::two_pi * k / opt.phase_samples;
                Trace trace = prefixes[r].trace;
                detail::extend_trace(trace, prefixes[r].state, prefix_intervals, grid, deltas[r],
                                     TwoToneDrive(pulses, probe), params);
                for (std::size_t w = 0; w < nw; ++w)
                    out[r * nw + w] += window_average(trace, windows[w]) / opt.phase_samples;
            }
        return out;
    });

    std::vector<ProbeCurve> curves(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        auto& c = curves[w];
        c.window = windows[w];
        c.frequencies = probe_freqs_hz;
        c.signal.assign(nf, 0.0);
        c.change.assign(nf, 0.0);
        c.stderr_change.assign(nf, 0.0);
        if (opt.keep_samples) {
            c.samples.assign(nr, std::vector<double>(nf, 0.0));
            c.weights = weights;
        }
        for (std::size_t f = 0; f < nf; ++f) {
            double mean = 0.0, mean_change = 0.0;
            for (std::size_t r = 0; r < nr; ++r) {
                const double v = values[f][r * nw + w];
                mean += weights[r] * v;
                mean_change += weights[r] * (v - prefixes[r].probe_off[w]);
                if (opt.keep_samples)
                    c.samples[r][f] = v - prefixes[r].probe_off[w];
            }
            c.signal[f] = mean;
            c.change[f] = mean_change;
            if (opt.mode == EnsembleMode::monte_carlo && nr > 1) {
                double ss = 0.0;
                for (std::size_t r = 0; r < nr; ++r) {
                    const double d = values[f][r * nw + w] - prefixes[r].probe_off[w] - mean_change;
                    ss += d * d;
                }
                c.stderr_change[f] = std::sqrt(ss / static_cast<double>(nr - 1) / static_cast<double>(nr));
            }
        }
    }
    return curves;
}

}  // namespace pulsetls
