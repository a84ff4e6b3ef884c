#pragma once

// Pulsed drive and fixed-step integration of the two-level master equation
//
//   d rho_ee/dt = i W/2 (rho_eg - rho_ge) - G rho_ee
//   d rho_gg/dt = -i W/2 (rho_eg - rho_ge) + G rho_ee
//   d rho_ge/dt = (i D - G/2) rho_ge - i W/2 (rho_ee - rho_gg)
//   d rho_eg/dt = (-i D - G/2) rho_eg + i W/2 (rho_ee - rho_gg)
//
// with W = W(t) the real Rabi drive, D the static detuning and G the decay
// rate. The same linear generator, applied to arbitrary 2x2 operators, drives
// the two-time correlators in spectra.hpp.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <numbers>
#include <vector>

#include "pulsetls/core.hpp"

namespace pulsetls {

/// Peak Rabi amplitude (rad/s) for which a Gaussian envelope with the given
/// FWHM, truncated to |t - t_k| <= support_halfwidth, has area
/// `rotation_angle`. Pass an infinite support for the untruncated pulse.
inline double calibrate_pulse_amplitude(double envelope_fwhm, double rotation_angle,
                                        double support_halfwidth)
{
    if (!(envelope_fwhm > 0.0))
        throw ConfigError("calibrate_pulse_amplitude: FWHM must be positive");
    if (!(rotation_angle > 0.0))
        throw ConfigError("calibrate_pulse_amplitude: rotation angle must be positive");
    if (!(support_halfwidth > 0.0))
        throw ConfigError("calibrate_pulse_amplitude: support half-width must be positive");
    const double sigma = envelope_fwhm / gaussian_fwhm_factor;
    const double truncated = std::isinf(support_halfwidth)
                                 ? 1.0
                                 : std::erf(support_halfwidth / (std::numbers::sqrt2 * sigma));
    return rotation_angle / (std::sqrt(2.0 * std::numbers::pi) * sigma * truncated);
}

/// A drive field usable by the integrators: instantaneous Rabi frequency
/// (real for an x-quadrature drive, complex when the y quadrature is also
/// driven) and whether any fast structure lies within [a, b], which selects
/// the fine substep.
template <class D>
concept DriveField = requires(const D& d, double t) {
    { d.rabi(t) } -> std::convertible_to<complex>;
    { d.fast_in(t, t) } -> std::convertible_to<bool>;
};

/// Resolved pulse train: amplitude calibrated, envelope evaluable.
class PulseTrain {
public:
    PulseTrain() = default;

    explicit PulseTrain(const PulseSequence& seq) : seq_(seq)
    {
        seq_.validate();
        if (seq_.peak_amplitude <= 0.0)
            seq_.peak_amplitude = calibrate_pulse_amplitude(seq.envelope_fwhm, seq.rotation_angle,
                                                            seq_.support());
        sigma_ = seq_.envelope_sigma();
        support_ = seq_.support();
        count_ = seq_.n_pulses;
    }

    /// A train without pulses (free evolution).
    static PulseTrain none() { return PulseTrain{}; }

    const PulseSequence& sequence() const { return seq_; }
    int count() const { return count_; }
    double peak_amplitude() const { return seq_.peak_amplitude; }
    double support() const { return support_; }

    double rabi(double t) const
    {
        if (count_ == 0)
            return 0.0;
        const int k = nearest(t);
        const double dt = t - seq_.center(k);
        if (std::abs(dt) > support_)
            return 0.0;
        return seq_.peak_amplitude * std::exp(-dt * dt / (2.0 * sigma_ * sigma_));
    }

    /// Envelope at t with the support cut decided at `ref` instead of t, so an
    /// integration piece on one side of a cut sees a smooth drive.
    double rabi_at(double t, double ref) const
    {
        if (count_ == 0)
            return 0.0;
        const int k = nearest(ref);
        if (std::abs(ref - seq_.center(k)) > support_)
            return 0.0;
        const double dt = t - seq_.center(k);
        return seq_.peak_amplitude * std::exp(-dt * dt / (2.0 * sigma_ * sigma_));
    }

    /// Support edges strictly inside (a, b), ascending; at most four.
    int breaks_in(double a, double b, double* out) const
    {
        if (count_ == 0)
            return 0;
        const double eps = 1e-9 * (b - a);
        int n = 0;
        for (int k = nearest(a); k <= nearest(b) && n < 4; ++k)
            for (double e : {seq_.center(k) - support_, seq_.center(k) + support_})
                if (e > a + eps && e < b - eps && n < 4)
                    out[n++] = e;
        return n;
    }

    bool fast_in(double a, double b) const
    {
        if (count_ == 0)
            return false;
        for (int k : {nearest(a), nearest(b), nearest(0.5 * (a + b))}) {
            const double c = seq_.center(k);
            if (c + support_ >= a && c - support_ <= b)
                return true;
        }
        return false;
    }

private:
    int nearest(double t) const
    {
        if (count_ == 1 || seq_.interpulse_delay <= 0.0)
            return 0;
        const double k = std::round((t - seq_.first_center) / seq_.interpulse_delay);
        return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(count_ - 1)));
    }

    PulseSequence seq_{};
    double sigma_ = 1.0;
    double support_ = 0.0;
    int count_ = 0;
};

/// Rabi amplitude (rad/s) of the pulse train at time t.
inline double pulse_envelope(double t, const PulseSequence& seq) { return PulseTrain(seq).rabi(t); }

/// Right-hand side of the master equation applied to a general operator.
inline Operator2 apply_generator(const Operator2& x, double omega, double delta, double gamma)
{
    using namespace std::complex_literals;
    const complex half_drive = 0.5i * omega;
    const complex coh = half_drive * (x.eg - x.ge);
    const complex pop = half_drive * (x.ee - x.gg);
    return {
        coh - gamma * x.ee,
        -coh + gamma * x.ee,
        complex(-0.5 * gamma, -delta) * x.eg + pop,
        complex(-0.5 * gamma, delta) * x.ge - pop,
    };
}

/// Generator for a complex drive, H_drive = (W s+ + W* s-)/2. Reduces to the
/// real form above when W is real.
inline Operator2 apply_generator(const Operator2& x, complex omega, double delta, double gamma)
{
    using namespace std::complex_literals;
    const complex w = omega;
    const complex wc = std::conj(omega);
    const complex flow = 0.5i * (wc * x.eg - w * x.ge);
    const complex pop = x.ee - x.gg;
    return {
        flow - gamma * x.ee,
        -flow + gamma * x.ee,
        complex(-0.5 * gamma, -delta) * x.eg + 0.5i * w * pop,
        complex(-0.5 * gamma, delta) * x.ge - 0.5i * wc * pop,
    };
}

/// One classical RK4 step of the linear generator for a general operator.
template <DriveField Drive>
Operator2 rk4_step(const Operator2& x, double t, double dt, double delta, const Drive& drive,
                   double gamma)
{
    const auto w0 = drive.rabi(t);
    const auto wm = drive.rabi(t + 0.5 * dt);
    const auto w1 = drive.rabi(t + dt);
    const Operator2 k1 = apply_generator(x, w0, delta, gamma);
    const Operator2 k2 = apply_generator(x + (0.5 * dt) * k1, wm, delta, gamma);
    const Operator2 k3 = apply_generator(x + (0.5 * dt) * k2, wm, delta, gamma);
    const Operator2 k4 = apply_generator(x + dt * k3, w1, delta, gamma);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One RK4 step of the density matrix, re-projected onto the Hermitian,
/// trace-one subspace.
template <DriveField Drive>
DensityMatrix step(const DensityMatrix& rho, double t, double dt, double delta, const Drive& drive,
                   const EmitterParams& params)
{
    if (!(dt > 0.0))
        throw ConfigError("step: dt must be positive");
    const auto next = DensityMatrix::from_operator(
        rk4_step(rho.as_operator(), t, dt, delta, drive, params.decay_rate));
    constexpr double slack = 1e-6;
    if (!(next.rho_ee() >= -slack && next.rho_ee() <= 1.0 + slack))
        throw NumericalError("step: population left [0, 1]; reduce the time step");
    return next;
}

inline DensityMatrix step(const DensityMatrix& rho, double t, double dt, double delta,
                          const PulseSequence& seq, const EmitterParams& params)
{
    return step(rho, t, dt, delta, PulseTrain(seq), params);
}

/// Integration time axis. Output nodes are spaced by base_step; any node
/// interval that touches fast drive structure is split into substeps no
/// longer than pulse_substep.
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    double base_step = 0.0;
    double pulse_substep = 0.0;

    /// base_step = tau/200, pulse_substep = FWHM/40.
    static TimeGrid defaults_for(const PulseSequence& seq, double t_start, double t_end)
    {
        return {t_start, t_end, seq.interpulse_delay / 200.0, seq.envelope_fwhm / 40.0};
    }

    void validate() const
    {
        if (!(base_step > 0.0) || !(pulse_substep > 0.0))
            throw ConfigError("time grid steps must be positive");
        if (pulse_substep > base_step)
            throw ConfigError("pulse substep must not exceed the base step");
        if (!(t_end > t_start))
            throw ConfigError("time grid must have t_end > t_start");
    }

    void validate_for(const PulseSequence& seq) const
    {
        validate();
        if (seq.envelope_fwhm / pulse_substep < 20.0 - 1e-9)
            throw ConfigError("pulse substep must resolve the envelope FWHM with >= 20 steps");
    }

    std::size_t intervals() const
    {
        const double n = (t_end - t_start) / base_step;
        const auto whole = static_cast<std::size_t>(std::floor(n + 1e-9));
        return (n - static_cast<double>(whole) > 1e-9) ? whole + 1 : whole;
    }

    double node(std::size_t j) const
    {
        return std::min(t_start + static_cast<double>(j) * base_step, t_end);
    }
};

/// Number of RK4 substeps used for the node interval [a, b].
template <DriveField Drive>
int substeps_for(double a, double b, const TimeGrid& grid, const Drive& drive)
{
    const double len = b - a;
    const double h = drive.fast_in(a, b) ? grid.pulse_substep : grid.base_step;
    return std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
}

/// A drive with cut-off points, see PulseTrain::rabi_at and breaks_in.
template <class D>
concept PiecewiseDrive = DriveField<D> && requires(const D& d, double t, double* out) {
    { d.rabi_at(t, t) } -> std::convertible_to<complex>;
    { d.breaks_in(t, t, out) } -> std::convertible_to<int>;
};

/// One smooth piece of a piecewise drive.
template <PiecewiseDrive Drive>
struct Anchored {
    const Drive& drive;
    double ref;

    auto rabi(double t) const { return drive.rabi_at(t, ref); }
    bool fast_in(double a, double b) const { return drive.fast_in(a, b); }
};

/// Calls f(t, h, drive) for every RK4 substep of the node interval [a, b].
/// Substeps of a piecewise drive end on its cut-off points.
template <DriveField Drive, class F>
void for_each_substep(double a, double b, const TimeGrid& grid, const Drive& drive, F&& f)
{
    if constexpr (PiecewiseDrive<Drive>) {
        double cuts[4];
        const int nc = drive.breaks_in(a, b, cuts);
        double lo = a;
        for (int i = 0; i <= nc; ++i) {
            const double hi = i < nc ? cuts[i] : b;
            const int m = substeps_for(lo, hi, grid, drive);
            const double h = (hi - lo) / m;
            const Anchored<Drive> piece{drive, 0.5 * (lo + hi)};
            for (int s = 0; s < m; ++s)
                f(lo + s * h, h, piece);
            lo = hi;
        }
    } else {
        const int m = substeps_for(a, b, grid, drive);
        const double h = (b - a) / m;
        for (int s = 0; s < m; ++s)
            f(a + s * h, h, drive);
    }
}

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;

    std::size_t size() const { return times.size(); }
};

/// Integrates rho0 across the grid; deterministic for fixed inputs.
template <DriveField Drive>
Trajectory evolve(const DensityMatrix& rho0, const TimeGrid& grid, double delta, const Drive& drive,
                  const EmitterParams& params)
{
    grid.validate();
    if (!(params.decay_rate >= 0.0))
        throw ConfigError("evolve: decay rate must be non-negative");
    const std::size_t n = grid.intervals();
    Trajectory traj;
    traj.times.reserve(n + 1);
    traj.states.reserve(n + 1);
    traj.times.push_back(grid.t_start);
    traj.states.push_back(rho0);
    DensityMatrix rho = rho0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = grid.node(j);
        const double b = grid.node(j + 1);
        for_each_substep(a, b, grid, drive, [&](double t, double h, const auto& d) {
            rho = step(rho, t, h, delta, d, params);
        });
        traj.times.push_back(b);
        traj.states.push_back(rho);
    }
    return traj;
}

inline Trajectory evolve(const DensityMatrix& rho0, const TimeGrid& grid, double delta,
                         const PulseSequence& seq, const EmitterParams& params)
{
    grid.validate_for(seq);
    return evolve(rho0, grid, delta, PulseTrain(seq), params);
}

/// Linear map on (ee, gg, eg, ge) component vectors, row-major.
struct Superop {
    std::array<complex, 16> m{};

    static Superop identity()
    {
        Superop s;
        for (int i = 0; i < 4; ++i)
            s.m[5 * i] = 1.0;
        return s;
    }

    Operator2 operator()(const Operator2& x) const
    {
        const complex v[4] = {x.ee, x.gg, x.eg, x.ge};
        complex r[4];
        for (int i = 0; i < 4; ++i)
            r[i] = m[4 * i] * v[0] + m[4 * i + 1] * v[1] + m[4 * i + 2] * v[2] + m[4 * i + 3] * v[3];
        return {r[0], r[1], r[2], r[3]};
    }

    /// this * rhs (apply rhs first).
    Superop after(const Superop& rhs) const
    {
        Superop out;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                complex acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += m[4 * i + k] * rhs.m[4 * k + j];
                out.m[4 * i + j] = acc;
            }
        return out;
    }
};

/// Exact linear map of the RK4 substeps across each node interval of the
/// grid: maps[j] carries an operator from node j to node j+1.
template <DriveField Drive>
std::vector<Superop> interval_maps(const TimeGrid& grid, double delta, const Drive& drive,
                                   double gamma)
{
    grid.validate();
    const std::size_t n = grid.intervals();
    std::vector<Superop> maps(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double a = grid.node(j);
        const double b = grid.node(j + 1);
        Superop total = Superop::identity();
        for_each_substep(a, b, grid, drive, [&](double t, double h, const auto& d) {
            Superop one;
            for (int col = 0; col < 4; ++col) {
                Operator2 e;
                (col == 0 ? e.ee : col == 1 ? e.gg : col == 2 ? e.eg : e.ge) = 1.0;
                const Operator2 r = rk4_step(e, t, h, delta, d, gamma);
                one.m[col] = r.ee;
                one.m[4 + col] = r.gg;
                one.m[8 + col] = r.eg;
                one.m[12 + col] = r.ge;
            }
            total = one.after(total);
        });
        maps[j] = total;
    }
    return maps;
}

/// Phase error of a single-pulse echo: an equal superposition evolves for
/// tau, receives one pulse centred at tau, and evolves for another tau with
/// no decay. Returns arg(rho_eg(2 tau)) - arg(rho_eg(0)) wrapped to (-pi, pi].
inline double echo_check(double delta, double tau, double envelope_fwhm,
                         double rotation_angle = std::numbers::pi)
{
    PulseSequence seq;
    seq.n_pulses = 1;
    seq.interpulse_delay = tau;
    seq.envelope_fwhm = envelope_fwhm;
    seq.rotation_angle = rotation_angle;
    seq.first_center = tau;
    if (2.0 * seq.support() >= tau)
        throw ConfigError("echo_check: pulse support must fit inside the interval");
    const PulseTrain train(seq);

    EmitterParams params;
    params.decay_rate = 0.0;
    TimeGrid grid{0.0, 2.0 * tau, std::min(tau / 200.0, envelope_fwhm / 40.0), envelope_fwhm / 40.0};
    const auto rho0 = DensityMatrix::superposition();
    const auto traj = evolve(rho0, grid, delta, train, params);
    return std::arg(traj.states.back().rho_eg() / rho0.rho_eg());
}

}  // namespace pulsetls
