#pragma once

// Shared value types and unit conventions.
//
// Internally every frequency is an angular frequency in rad/s and every time
// is in seconds. MHz and ns appear only at file and command-line boundaries.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pulsetls {

using complex = std::complex<double>;

/// Raised for invalid inputs or configurations (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an integration or reduction produces an unphysical result
/// (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double mhz_to_rad_per_s = two_pi * 1e6;
inline constexpr double ns_to_s = 1e-9;

constexpr double mhz_to_rad(double mhz) { return mhz * mhz_to_rad_per_s; }
constexpr double rad_to_mhz(double rad_per_s) { return rad_per_s / mhz_to_rad_per_s; }
constexpr double ns_to_sec(double ns) { return ns * ns_to_s; }
constexpr double sec_to_ns(double s) { return s / ns_to_s; }
constexpr double hz_to_rad(double hz) { return hz * two_pi; }
constexpr double rad_to_hz(double rad_per_s) { return rad_per_s / two_pi; }

}  // namespace units

/// 2*sqrt(2 ln 2): ratio between the FWHM and the standard deviation of a
/// Gaussian.
inline const double gaussian_fwhm_factor = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

/// Standard deviation of a Gaussian with the given FWHM (any unit).
inline double fwhm_to_sigma(double fwhm)
{
    if (!(fwhm >= 0.0))
        throw ConfigError("fwhm_to_sigma: FWHM must be non-negative");
    return fwhm / gaussian_fwhm_factor;
}

inline double sigma_to_fwhm(double sigma) { return sigma * gaussian_fwhm_factor; }

/// FWHM in Hz of the natural Lorentzian line for decay rate `gamma` (1/s).
inline double lifetime_limit_fwhm(double gamma)
{
    if (!(gamma > 0.0))
        throw ConfigError("lifetime_limit_fwhm: decay rate must be positive");
    return gamma / units::two_pi;
}

/// General (not necessarily Hermitian) 2x2 operator in the {e, g} basis.
/// Used both for density matrices and for the seeds of two-time correlators.
struct Operator2 {
    complex ee{}, gg{}, eg{}, ge{};

    Operator2& operator+=(const Operator2& o)
    {
        ee += o.ee;
        gg += o.gg;
        eg += o.eg;
        ge += o.ge;
        return *this;
    }
    friend Operator2 operator+(Operator2 a, const Operator2& b) { return a += b; }
    friend Operator2 operator*(double s, const Operator2& a)
    {
        return {s * a.ee, s * a.gg, s * a.eg, s * a.ge};
    }
    complex trace() const { return ee + gg; }
};

/// Two-level density matrix. Only rho_ee and rho_eg are stored: rho_gg is
/// 1 - rho_ee and rho_ge is conj(rho_eg), so trace and Hermiticity hold
/// structurally.
class DensityMatrix {
public:
    DensityMatrix() = default;

    DensityMatrix(double rho_ee, complex rho_eg) : ee_(rho_ee), eg_(rho_eg) {}

    static DensityMatrix excited() { return {1.0, 0.0}; }
    static DensityMatrix ground() { return {0.0, 0.0}; }

    /// (|e> + e^{i phi}|g>)/sqrt(2)
    static DensityMatrix superposition(double phase = 0.0)
    {
        return {0.5, 0.5 * std::polar(1.0, -phase)};
    }

    /// Projects a general operator onto the Hermitian, trace-one subspace.
    static DensityMatrix from_operator(const Operator2& op)
    {
        const double ee = 0.5 * (op.ee.real() + (1.0 - op.gg.real()));
        const complex eg = 0.5 * (op.eg + std::conj(op.ge));
        return {ee, eg};
    }

    double rho_ee() const { return ee_; }
    double rho_gg() const { return 1.0 - ee_; }
    complex rho_eg() const { return eg_; }
    complex rho_ge() const { return std::conj(eg_); }

    Operator2 as_operator() const { return {ee_, rho_gg(), eg_, rho_ge()}; }

    /// |rho_eg|^2 - rho_ee*rho_gg; non-positive for a physical state.
    double positivity_excess() const { return std::norm(eg_) - ee_ * rho_gg(); }

    bool is_physical(double tol = 1e-9) const
    {
        return ee_ >= -tol && ee_ <= 1.0 + tol && positivity_excess() <= tol;
    }

private:
    double ee_ = 0.0;
    complex eg_{};
};

/// Periodic train of truncated Gaussian pulses. Pulse k is centred at
/// first_center + k*interpulse_delay.
struct PulseSequence {
    int n_pulses = 12;
    double interpulse_delay = 10e-9;   // s
    double envelope_fwhm = 1.6e-9;     // s
    double peak_amplitude = 0.0;       // rad/s; 0 means "calibrate"
    double rotation_angle = std::numbers::pi;
    double support_halfwidth = 0.0;    // s; 0 means 3 sigma_t
    double first_center = 0.0;         // s

    double envelope_sigma() const { return envelope_fwhm / gaussian_fwhm_factor; }

    double support() const
    {
        return support_halfwidth > 0.0 ? support_halfwidth : 3.0 * envelope_sigma();
    }

    double center(int k) const { return first_center + k * interpulse_delay; }

    void validate() const
    {
        if (n_pulses < 1)
            throw ConfigError("pulse sequence needs at least one pulse");
        if (!(envelope_fwhm > 0.0))
            throw ConfigError("pulse envelope FWHM must be positive");
        if (!(rotation_angle > 0.0))
            throw ConfigError("pulse rotation angle must be positive");
        if (support_halfwidth < 0.0)
            throw ConfigError("pulse support half-width must be positive");
        if (n_pulses > 1 && !(interpulse_delay > 2.0 * support()))
            throw ConfigError("interpulse delay must exceed the pulse support width");
    }
};

/// Gaussian static-detuning ensemble. Angular frequencies.
struct DetuningModel {
    double mean = 0.0;
    double sigma = 0.0;
    int n_realizations = 200;
    std::uint64_t seed = 1;

    bool deterministic() const { return sigma == 0.0; }
    int effective_realizations() const { return deterministic() ? 1 : n_realizations; }

    void validate() const
    {
        if (!(sigma >= 0.0))
            throw ConfigError("detuning sigma must be non-negative");
        if (n_realizations < 1)
            throw ConfigError("detuning model needs at least one realization");
    }
};

struct EmitterParams {
    double decay_rate = 1.0 / 12.3e-9;        // Gamma, 1/s
    std::optional<double> dark_decay_time;    // s

    void validate() const
    {
        if (!(decay_rate > 0.0))
            throw ConfigError("decay rate must be positive");
        if (dark_decay_time && !(*dark_decay_time > 0.0))
            throw ConfigError("dark-state decay time must be positive");
    }
};

/// Spectrum on a detuning-from-carrier axis in Hz.
struct Spectrum {
    std::vector<double> frequencies;
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<double> q;
    std::vector<double> stderr_q;

    std::size_t size() const { return frequencies.size(); }

    void resize(std::size_t n)
    {
        frequencies.resize(n);
        p1.assign(n, 0.0);
        p2.assign(n, 0.0);
        q.assign(n, 0.0);
        stderr_q.assign(n, 0.0);
    }

    void validate() const
    {
        const auto n = frequencies.size();
        if (p1.size() != n || p2.size() != n || q.size() != n || stderr_q.size() != n)
            throw ConfigError("spectrum arrays differ in length");
        for (std::size_t i = 1; i < n; ++i)
            if (!(frequencies[i] > frequencies[i - 1]))
                throw ConfigError("spectrum frequencies must be strictly increasing");
    }

    void scale(double a)
    {
        for (std::size_t i = 0; i < size(); ++i) {
            p1[i] *= a;
            p2[i] *= a;
            q[i] *= a;
            stderr_q[i] *= std::abs(a);
        }
    }
};

/// `n` points evenly spaced over [lo, hi] inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

}  // namespace pulsetls
