#pragma once

// Stimulated-emission (P1), direct-absorption (P2) and net-absorption
// (Q = P2 - P1) spectra from two-time correlators.
//
//   P2(w) = Re int_0^T dt int_0^{T-t} dth <s-(t) s+(t+th)> exp(-i w th)
//   P1(w) = Re int_0^T dt int_0^{T-t} dth <s+(t+th) s-(t)> exp(-i w th)
//
// Correlators follow the quantum regression theorem: the seed rho(t) s- (P2)
// or s- rho(t) (P1) is propagated in th with the master-equation generator
// and read out with Tr[s+ .]. The double integral is collapsed to
// D(th) = int C(t, th) dt and then transformed on the requested frequencies.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pulsetls/core.hpp"
#include "pulsetls/dynamics.hpp"
#include "pulsetls/ensemble.hpp"

namespace pulsetls {

/// Discretisation of the (t, theta) integration domain. All times in s.
struct CorrelatorGrid {
    double horizon = 0.0;        // T
    double theta_max = 0.0;      // 0 means T
    double theta_step = 0.0;
    double t_step = 0.0;         // integer multiple of theta_step; 0 means theta_step
    double pulse_substep = 0.0;  // 0 means envelope FWHM / 40
    double t_begin = 0.0;        // lower limit of the t integral

    /// T = N tau, theta_step = t_step = tau/100.
    static CorrelatorGrid defaults_for(const PulseSequence& seq)
    {
        CorrelatorGrid g;
        g.horizon = seq.n_pulses * seq.interpulse_delay;
        g.theta_step = seq.interpulse_delay / 100.0;
        g.t_step = g.theta_step;
        g.pulse_substep = seq.envelope_fwhm / 40.0;
        return g;
    }

    double effective_theta_max() const { return theta_max > 0.0 ? theta_max : horizon; }
    double effective_t_step() const { return t_step > 0.0 ? t_step : theta_step; }

    std::size_t theta_count() const { return count_of(horizon); }
    std::size_t theta_limit() const { return count_of(effective_theta_max()); }
    std::size_t row_stride() const { return count_of(effective_t_step()); }
    std::size_t first_row() const { return count_of(t_begin); }

    void validate(double f_max_hz = 0.0) const
    {
        if (!(horizon > 0.0) || !(theta_step > 0.0))
            throw ConfigError("correlator grid needs a positive horizon and theta step");
        if (!(effective_theta_max() <= horizon * (1 + 1e-12)))
            throw ConfigError("theta_max must not exceed the horizon");
        if (!integral(horizon) || !integral(effective_t_step()) || !integral(t_begin) ||
            !(effective_t_step() > 0.0))
            throw ConfigError("horizon, t_step and t_begin must be multiples of theta_step");
        if (t_begin < 0.0 || t_begin >= horizon)
            throw ConfigError("t_begin must lie inside [0, horizon)");
        if (pulse_substep < 0.0 || pulse_substep > theta_step)
            throw ConfigError("pulse substep must be positive and not exceed theta_step");
        if (f_max_hz > 0.0 && theta_step > 1.0 / (10.0 * f_max_hz) * (1 + 1e-12))
            throw ConfigError("theta_step too coarse for the requested frequency range");
    }

private:
    bool integral(double x) const
    {
        const double r = x / theta_step;
        return std::abs(r - std::round(r)) < 1e-6;
    }
    std::size_t count_of(double x) const
    {
        return static_cast<std::size_t>(std::floor(x / theta_step + 1e-6));
    }
};

/// Control drive acting after the state has been prepared in |e>: the first
/// pulse of `seq` is the preparation pulse at t = 0 and is not integrated.
inline PulseTrain control_drive(const PulseSequence& seq)
{
    if (seq.n_pulses <= 1)
        return PulseTrain::none();
    PulseSequence rest = seq;
    if (rest.peak_amplitude <= 0.0)
        rest.peak_amplitude = calibrate_pulse_amplitude(seq.envelope_fwhm, seq.rotation_angle, seq.support());
    rest.n_pulses = seq.n_pulses - 1;
    rest.first_center = seq.first_center + seq.interpulse_delay;
    return PulseTrain(rest);
}

/// Correlator C(t_j, theta_m) on rows t_j and lags theta_m; entries with
/// t_j + theta_m > T are zero.
struct CorrelatorField {
    std::vector<double> t;
    std::vector<double> theta;
    std::vector<complex> values;  // row-major, rows indexed by t

    complex operator()(std::size_t row, std::size_t lag) const { return values[row * theta.size() + lag]; }
};

enum class Correlator { stimulated_emission, direct_absorption };

namespace detail {

inline TimeGrid node_grid(const CorrelatorGrid& g, const PulseSequence& seq)
{
    const double sub = g.pulse_substep > 0.0 ? g.pulse_substep : seq.envelope_fwhm / 40.0;
    return {0.0, g.horizon, g.theta_step, std::min(sub, g.theta_step)};
}

/// Seed of the regression for P1 (s- rho) or P2 (rho s-).
inline Operator2 seed(Correlator which, const DensityMatrix& rho)
{
    if (which == Correlator::stimulated_emission)
        return {0.0, rho.rho_eg(), 0.0, rho.rho_ee()};
    return {rho.rho_eg(), 0.0, 0.0, rho.rho_gg()};
}

/// Trapezoid weight of row j for the t integral over [t_begin, T - theta_m],
/// in units of theta_step. `avail` = J - m fine steps; rows sit at
/// j0 + r*stride.
inline double row_weight(std::size_t r, std::size_t j0, std::size_t stride, std::size_t avail)
{
    if (avail <= j0)
        return 0.0;
    const std::size_t span = avail - j0;
    const std::size_t last = span / stride;
    if (r > last)
        return 0.0;
    const double rem = static_cast<double>(span - last * stride);
    const double full = static_cast<double>(stride);
    if (last == 0)
        return rem;
    if (r == 0)
        return 0.5 * full;
    if (r == last)
        return 0.5 * full + rem;
    return full;
}

inline std::vector<DensityMatrix> states_on_nodes(const std::vector<Superop>& maps,
                                                  const DensityMatrix& rho0)
{
    std::vector<DensityMatrix> states;
    states.reserve(maps.size() + 1);
    states.push_back(rho0);
    Operator2 x = rho0.as_operator();
    for (const auto& m : maps) {
        x = m(x);
        states.push_back(DensityMatrix::from_operator(x));
    }
    return states;
}

/// Collapsed correlators D1(theta_m), D2(theta_m) (units: s) for one
/// realization.
struct Collapsed {
    std::vector<complex> d1;
    std::vector<complex> d2;
};

inline Collapsed collapse(const std::vector<Superop>& maps, const std::vector<DensityMatrix>& states,
                          const CorrelatorGrid& g)
{
    const std::size_t J = g.theta_count();
    const std::size_t M = g.theta_limit();
    const std::size_t j0 = g.first_row();
    const std::size_t stride = g.row_stride();
    const double h = g.theta_step;
    Collapsed out{std::vector<complex>(M + 1), std::vector<complex>(M + 1)};
    for (std::size_t r = 0, j = j0; j < J; ++r, j += stride) {
        Operator2 x1 = seed(Correlator::stimulated_emission, states[j]);
        Operator2 x2 = seed(Correlator::direct_absorption, states[j]);
        const std::size_t m_end = std::min(M, J - j);
        for (std::size_t m = 0; m <= m_end; ++m) {
            const double w = row_weight(r, j0, stride, J - m) * h;
            out.d1[m] += w * x1.ge;
            out.d2[m] += w * x2.ge;
            if (m < m_end) {
                x1 = maps[j + m](x1);
                x2 = maps[j + m](x2);
            }
        }
    }
    return out;
}

/// exp(-i 2 pi f theta_m) * trapezoid weight, tabulated for reuse across
/// realizations.
class FourierTable {
public:
    FourierTable(const std::vector<double>& freqs_hz, const CorrelatorGrid& g)
        : n_theta_(g.theta_limit() + 1), table_(freqs_hz.size() * n_theta_)
    {
        const double h = g.theta_step;
        for (std::size_t i = 0; i < freqs_hz.size(); ++i)
            for (std::size_t m = 0; m < n_theta_; ++m) {
                const double w = (m == 0 || m + 1 == n_theta_) ? 0.5 * h : h;
                table_[i * n_theta_ + m] =
                    w * std::polar(1.0, -units::two_pi * freqs_hz[i] * static_cast<double>(m) * h);
            }
    }

    double transform_real(std::size_t freq, const std::vector<complex>& d) const
    {
        const complex* row = &table_[freq * n_theta_];
        double acc = 0.0;
        for (std::size_t m = 0; m < n_theta_; ++m)
            acc += row[m].real() * d[m].real() - row[m].imag() * d[m].imag();
        return acc;
    }

private:
    std::size_t n_theta_;
    std::vector<complex> table_;
};

/// Unnormalised P1, P2, Q of one static-detuning realization.
template <DriveField Drive>
Spectrum raw_spectrum(double delta, const Drive& drive, const PulseSequence& seq,
                      const EmitterParams& params, const CorrelatorGrid& g,
                      const std::vector<double>& freqs_hz, const FourierTable& table)
{
    const TimeGrid nodes = node_grid(g, seq);
    const auto maps = interval_maps(nodes, delta, drive, params.decay_rate);
    const auto states = states_on_nodes(maps, DensityMatrix::excited());
    const auto d = collapse(maps, states, g);
    Spectrum s;
    s.resize(freqs_hz.size());
    s.frequencies = freqs_hz;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        s.p1[i] = table.transform_real(i, d.d1);
        s.p2[i] = table.transform_real(i, d.d2);
        s.q[i] = s.p2[i] - s.p1[i];
    }
    return s;
}

}  // namespace detail

/// Excited-state trajectory under the control drive, sampled on the
/// correlator nodes.
inline Trajectory correlator_trajectory(double delta, const PulseSequence& seq,
                                        const EmitterParams& params, const CorrelatorGrid& g)
{
    g.validate();
    const auto nodes = detail::node_grid(g, seq);
    return evolve(DensityMatrix::excited(), nodes, delta, control_drive(seq), params);
}

/// Two-time correlator field on the grid rows. `traj` must cover [0, T] and
/// contain every row time.
inline CorrelatorField correlator_field(Correlator which, const Trajectory& traj, double delta,
                                        const PulseSequence& seq, const EmitterParams& params,
                                        const CorrelatorGrid& g)
{
    g.validate();
    const std::size_t J = g.theta_count();
    const std::size_t M = g.theta_limit();
    const double h = g.theta_step;
    if (traj.size() == 0 || traj.times.back() < g.horizon - 1e-6 * h)
        throw ConfigError("trajectory does not cover the correlator horizon");
    const auto maps = interval_maps(detail::node_grid(g, seq), delta, control_drive(seq), params.decay_rate);

    CorrelatorField field;
    for (std::size_t m = 0; m <= M; ++m)
        field.theta.push_back(static_cast<double>(m) * h);
    for (std::size_t j = g.first_row(); j <= J; j += g.row_stride())
        field.t.push_back(static_cast<double>(j) * h);
    field.values.assign(field.t.size() * field.theta.size(), complex{});

    for (std::size_t r = 0; r < field.t.size(); ++r) {
        const double t = field.t[r];
        const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t - 1e-6 * h);
        if (it == traj.times.end() || std::abs(*it - t) > 1e-6 * h)
            throw ConfigError("trajectory is missing a correlator row time");
        const auto& rho = traj.states[static_cast<std::size_t>(it - traj.times.begin())];
        Operator2 x = detail::seed(which, rho);
        const std::size_t j = static_cast<std::size_t>(std::llround(t / h));
        const std::size_t m_end = std::min(M, J - j);
        for (std::size_t m = 0; m <= m_end; ++m) {
            field.values[r * field.theta.size() + m] = x.ge;
            if (m < m_end)
                x = maps[j + m](x);
        }
    }
    return field;
}

/// <s-(t) s+(t+theta)>, the direct-absorption correlator.
inline CorrelatorField correlator_p2(const Trajectory& traj, double delta, const PulseSequence& seq,
                                     const EmitterParams& params, const CorrelatorGrid& g)
{
    return correlator_field(Correlator::direct_absorption, traj, delta, seq, params, g);
}

/// <s+(t+theta) s-(t)>, the stimulated-emission correlator.
inline CorrelatorField correlator_p1(const Trajectory& traj, double delta, const PulseSequence& seq,
                                     const EmitterParams& params, const CorrelatorGrid& g)
{
    return correlator_field(Correlator::stimulated_emission, traj, delta, seq, params, g);
}

/// Symmetric frequency axis of n points over +-span_factor/tau (Hz).
inline std::vector<double> default_frequencies(double tau, std::size_t n = 401, double span_factor = 1.5)
{
    const double half = span_factor / tau;
    return linspace(-half, half, n);
}

struct SpectrumOptions {
    EnsembleMode mode = EnsembleMode::monte_carlo;
    int quadrature_order = 21;
    unsigned threads = default_threads();
    /// Scale so the uncontrolled reference peak of Q equals 1.
    bool normalize = true;
};

/// Ensemble-averaged P1, P2, Q. Realizations are reduced in index order, so
/// the result is independent of the thread count.
template <DriveField Drive>
Spectrum raw_ensemble(const DetuningModel& model, const Drive& drive, const PulseSequence& seq,
                      const EmitterParams& params, const CorrelatorGrid& g,
                      const std::vector<double>& freqs_hz, const SpectrumOptions& opt)
{
    model.validate();
    params.validate();
    const double f_max = freqs_hz.empty() ? 0.0
                                          : std::max(std::abs(freqs_hz.front()), std::abs(freqs_hz.back()));
    g.validate(f_max);
    Spectrum{freqs_hz, freqs_hz, freqs_hz, freqs_hz, freqs_hz}.validate();
    const detail::FourierTable table(freqs_hz, g);

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
    const auto parts = parallel_map(deltas.size(), opt.threads, [&](std::size_t i) {
        return detail::raw_spectrum(deltas[i], drive, seq, params, g, freqs_hz, table);
    });

    Spectrum avg;
    avg.resize(freqs_hz.size());
    avg.frequencies = freqs_hz;
    for (std::size_t r = 0; r < parts.size(); ++r)
        for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
            avg.p1[i] += weights[r] * parts[r].p1[i];
            avg.p2[i] += weights[r] * parts[r].p2[i];
            avg.q[i] += weights[r] * parts[r].q[i];
        }
    const std::size_t n = parts.size();
    if (opt.mode == EnsembleMode::monte_carlo && n > 1) {
        for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
            double ss = 0.0;
            for (const auto& p : parts)
                ss += (p.q[i] - avg.q[i]) * (p.q[i] - avg.q[i]);
            avg.stderr_q[i] = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
        }
    }
    for (std::size_t i = 0; i < freqs_hz.size(); ++i)
        if (!std::isfinite(avg.q[i]))
            throw NumericalError("spectrum is not finite");
    return avg;
}

/// Peak value of Q for the same parameters without control pulses.
inline double reference_peak(const DetuningModel& model, const PulseSequence& seq,
                             const EmitterParams& params, const CorrelatorGrid& g,
                             const std::vector<double>& freqs_hz, const SpectrumOptions& opt)
{
    const auto ref = raw_ensemble(model, PulseTrain::none(), seq, params, g, freqs_hz, opt);
    const double peak = *std::max_element(ref.q.begin(), ref.q.end());
    if (!(peak > 0.0))
        throw NumericalError("uncontrolled reference has no positive peak on this frequency grid");
    return peak;
}

/// Ensemble spectrum with no control pulses (the system still starts in |e>).
inline Spectrum uncontrolled_reference(const DetuningModel& model, const PulseSequence& seq,
                                       const EmitterParams& params, const CorrelatorGrid& g,
                                       const std::vector<double>& freqs_hz,
                                       const SpectrumOptions& opt = {})
{
    auto s = raw_ensemble(model, PulseTrain::none(), seq, params, g, freqs_hz, opt);
    if (opt.normalize) {
        const double peak = *std::max_element(s.q.begin(), s.q.end());
        if (!(peak > 0.0))
            throw NumericalError("uncontrolled reference has no positive peak on this frequency grid");
        s.scale(1.0 / peak);
    }
    return s;
}

/// Ensemble-averaged controlled spectrum.
inline Spectrum ensemble_spectrum(const DetuningModel& model, const PulseSequence& seq,
                                  const EmitterParams& params, const CorrelatorGrid& g,
                                  const std::vector<double>& freqs_hz, const SpectrumOptions& opt = {})
{
    auto s = raw_ensemble(model, control_drive(seq), seq, params, g, freqs_hz, opt);
    if (opt.normalize)
        s.scale(1.0 / reference_peak(model, seq, params, g, freqs_hz, opt));
    return s;
}

/// Controlled spectrum of a single static detuning (rad/s).
inline Spectrum spectrum_single(double delta, const PulseSequence& seq, const EmitterParams& params,
                                const CorrelatorGrid& g, const std::vector<double>& freqs_hz,
                                bool normalize = true)
{
    DetuningModel fixed{delta, 0.0, 1, 0};
    SpectrumOptions opt;
    opt.normalize = normalize;
    opt.threads = 1;
    return ensemble_spectrum(fixed, seq, params, g, freqs_hz, opt);
}

}  // namespace pulsetls
