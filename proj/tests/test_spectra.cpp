#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pulsetls/fitkit.hpp"
#include "pulsetls/spectra.hpp"

using namespace pulsetls;

namespace {

constexpr double kGamma = 1.0 / 12.3e-9;

// Closed-form P1 and P2 of free decay from |e> (no drive) over the
// triangle 0 <= t, 0 <= theta, t + theta <= T.
struct FreeDecay {
    double p1, p2;
};

FreeDecay free_decay_oracle(double delta, double f_hz, double T)
{
    const complex a(-0.5 * kGamma, delta - units::two_pi * f_hz);
    const complex eaT = std::exp(a * T);
    const complex p1 = (eaT * (1.0 - std::exp(-(kGamma + a) * T)) / (kGamma + a) - (1.0 - std::exp(-kGamma * T)) / kGamma) / a;
    const complex all = ((eaT - 1.0) / a - T) / a;
    return {p1.real(), (all - p1).real()};
}

PulseSequence no_control()
{
    PulseSequence seq;
    seq.n_pulses = 1;  // only the preparation pulse
    return seq;
}

CorrelatorGrid long_grid(double T, double h)
{
    CorrelatorGrid g;
    g.horizon = T;
    g.theta_step = h;
    return g;
}

std::size_t argmax(const std::vector<double>& v)
{
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST(Correlators, ZeroLagIdentities)
{
    PulseSequence seq;
    seq.n_pulses = 5;
    const EmitterParams p;
    const double delta = units::mhz_to_rad(23.0);
    const auto g = CorrelatorGrid::defaults_for(seq);
    const auto traj = correlator_trajectory(delta, seq, p, g);
    const auto c1 = correlator_p1(traj, delta, seq, p, g);
    const auto c2 = correlator_p2(traj, delta, seq, p, g);
    ASSERT_EQ(c1.t.size(), traj.size());
    for (std::size_t r = 0; r < c1.t.size(); ++r) {
        EXPECT_NEAR(std::abs(c1(r, 0) - traj.states[r].rho_ee()), 0.0, 1e-9);
        EXPECT_NEAR(std::abs(c2(r, 0) - traj.states[r].rho_gg()), 0.0, 1e-9);
    }
}

TEST(Correlators, FreeEvolutionClosedForms)
{
    const auto seq = no_control();
    const EmitterParams p;
    const double delta = units::mhz_to_rad(-31.0);
    const auto g = long_grid(60e-9, 0.05e-9);
    const auto traj = correlator_trajectory(delta, seq, p, g);
    const auto c1 = correlator_p1(traj, delta, seq, p, g);
    const auto c2 = correlator_p2(traj, delta, seq, p, g);
    for (std::size_t r = 0; r < c1.t.size(); r += 37)
        for (std::size_t m = 0; r + m < c1.t.size(); m += 41) {
            const double t = c1.t[r], th = c1.theta[m];
            const complex lag = std::exp(complex(-0.5 * kGamma, delta) * th);
            EXPECT_NEAR(std::abs(c1(r, m) - std::exp(-kGamma * t) * lag), 0.0, 1e-9);
            EXPECT_NEAR(std::abs(c2(r, m) - (1.0 - std::exp(-kGamma * t)) * lag), 0.0, 1e-9);
        }
}

TEST(Correlators, GroundStateHasNoEmission)
{
    const auto seq = no_control();
    const EmitterParams p;
    const auto g = long_grid(20e-9, 0.1e-9);
    Trajectory traj = evolve(DensityMatrix::ground(), detail::node_grid(g, seq), 0.0, PulseTrain::none(), p);
    const auto c1 = correlator_p1(traj, 0.0, seq, p, g);
    const auto c2 = correlator_p2(traj, 1e8, seq, p, g);
    for (const auto& v : c1.values)
        EXPECT_EQ(std::abs(v), 0.0);
    EXPECT_NEAR(std::abs(c2(0, 10) - std::exp(complex(-0.5 * kGamma, 1e8) * 1e-9)), 0.0, 1e-9);
}

TEST(Correlators, RejectShortTrajectory)
{
    PulseSequence seq;
    const EmitterParams p;
    const auto g = CorrelatorGrid::defaults_for(seq);
    auto short_grid = g;
    short_grid.horizon = g.horizon / 2;
    const auto traj = correlator_trajectory(0.0, seq, p, short_grid);
    EXPECT_THROW(correlator_p1(traj, 0.0, seq, p, g), ConfigError);
}

TEST(CorrelatorGridTest, Validation)
{
    PulseSequence seq;
    auto g = CorrelatorGrid::defaults_for(seq);
    EXPECT_DOUBLE_EQ(g.horizon, 120e-9);
    EXPECT_NO_THROW(g.validate(1.5 / seq.interpulse_delay));
    EXPECT_THROW(g.validate(2e9), ConfigError);  // needs theta_step <= 0.05 ns
    auto bad = g;
    bad.theta_max = 2 * g.horizon;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = g;
    bad.t_step = 1.5 * g.theta_step;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = g;
    bad.horizon = 120.05e-9;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SpectrumSingle, FreeDecayMatchesAnalyticDoubleIntegral)
{
    const auto seq = no_control();
    const EmitterParams p;
    const double delta = units::mhz_to_rad(20.0);
    const double T = 150e-9;
    const auto freqs = linspace(-60e6, 100e6, 161);
    const auto s = spectrum_single(delta, seq, p, long_grid(T, 0.05e-9), freqs, false);
    double peak = 0.0;
    for (double f : freqs)
        peak = std::max(peak, free_decay_oracle(delta, f, T).p1);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const auto o = free_decay_oracle(delta, freqs[i], T);
        EXPECT_NEAR(s.p1[i], o.p1, 2e-3 * peak) << freqs[i];
        EXPECT_NEAR(s.p2[i], o.p2, 2e-3 * peak) << freqs[i];
    }
}

TEST(SpectrumSingle, FreeDecayLorentzian)
{
    const auto seq = no_control();
    const EmitterParams p;
    const double f0 = 20e6;
    const auto freqs = linspace(-40e6, 80e6, 241);
    const auto s = spectrum_single(units::hz_to_rad(f0), seq, p, long_grid(400e-9, 0.1e-9), freqs, false);
    const std::size_t k = argmax(s.p1);
    const auto fit_res = fit(ModelSpec::lorentzian_sum(1), freqs, s.p1, {s.p1[k], freqs[k], 15e6, 0.0});
    ASSERT_TRUE(fit_res.converged);
    const double step = freqs[1] - freqs[0];
    EXPECT_NEAR(fit_res.params[1], f0, step);
    EXPECT_NEAR(fit_res.params[1] / f0, 1.0, 0.01);
    EXPECT_NEAR(fit_res.params[2] / lifetime_limit_fwhm(kGamma), 1.0, 0.02);
    // the repopulated ground state absorbs at the same frequency
    EXPECT_NEAR(freqs[argmax(s.p2)], f0, step);
}

TEST(SpectrumSingle, PiTrainCarrierExtremum)
{
    PulseSequence seq;
    const EmitterParams p;
    const auto freqs = default_frequencies(seq.interpulse_delay);
    const auto s = spectrum_single(0.0, seq, p, CorrelatorGrid::defaults_for(seq), freqs);
    const std::size_t c = freqs.size() / 2;
    ASSERT_EQ(freqs[c], 0.0);
    const bool min = s.q[c] < s.q[c - 1] && s.q[c] < s.q[c + 1];
    const bool max = s.q[c] > s.q[c - 1] && s.q[c] > s.q[c + 1];
    EXPECT_TRUE(min || max);
    // symmetric for zero detuning
    for (std::size_t i = 0; i < freqs.size(); ++i)
        EXPECT_NEAR(s.q[i], s.q[freqs.size() - 1 - i], 1e-12);
}

TEST(SpectrumSingle, CombLinesAtHalfInversePeriod)
{
    PulseSequence seq;
    seq.n_pulses = 21;
    const EmitterParams p;
    const double spacing = 1.0 / (2.0 * seq.interpulse_delay);
    const auto freqs = default_frequencies(seq.interpulse_delay);
    const double step = freqs[1] - freqs[0];
    for (double f0 : {0.0, 12e6, -27e6}) {
        const auto s = spectrum_single(units::hz_to_rad(f0), seq, p, CorrelatorGrid::defaults_for(seq), freqs);
        const auto total = [&](std::size_t i) { return s.p1[i] + s.p2[i]; };
        for (int n : {-1, 1}) {
            std::size_t best = 0;
            for (std::size_t i = 1; i + 1 < freqs.size(); ++i)
                if (std::abs(freqs[i] - n * spacing) < 0.3 * spacing &&
                    (best == 0 || total(i) > total(best)))
                    best = i;
            // within 5% of the line spacing
            EXPECT_NEAR(freqs[best], n * spacing, 0.05 * spacing + step) << f0 << " " << n;
        }
    }
}

TEST(Ensemble, DegenerateEqualsSingle)
{
    PulseSequence seq;
    seq.n_pulses = 4;
    const EmitterParams p;
    const double d0 = units::mhz_to_rad(7.0);
    const auto g = CorrelatorGrid::defaults_for(seq);
    const auto freqs = default_frequencies(seq.interpulse_delay, 81);
    const auto a = ensemble_spectrum(DetuningModel{d0, 0.0, 50, 3}, seq, p, g, freqs);
    const auto b = spectrum_single(d0, seq, p, g, freqs);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        EXPECT_EQ(a.q[i], b.q[i]);
        EXPECT_EQ(a.p1[i], b.p1[i]);
        EXPECT_EQ(a.stderr_q[i], 0.0);
    }
}

TEST(Ensemble, SymmetricForZeroMean)
{
    PulseSequence seq;
    seq.n_pulses = 6;
    const EmitterParams p;
    const auto g = CorrelatorGrid::defaults_for(seq);
    const auto freqs = default_frequencies(seq.interpulse_delay, 101);
    const DetuningModel m{0.0, units::mhz_to_rad(fwhm_to_sigma(30.0)), 60, 5};
    SpectrumOptions gh;
    gh.mode = EnsembleMode::gauss_hermite;
    const auto q = ensemble_spectrum(m, seq, p, g, freqs, gh);
    for (std::size_t i = 0; i < freqs.size(); ++i)
        EXPECT_NEAR(q.q[i], q.q[freqs.size() - 1 - i], 1e-9);

    const auto mc = ensemble_spectrum(m, seq, p, g, freqs);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const std::size_t j = freqs.size() - 1 - i;
        const double se = std::hypot(mc.stderr_q[i], mc.stderr_q[j]);
        EXPECT_LE(std::abs(mc.q[i] - mc.q[j]), 3.0 * se + 1e-12) << freqs[i];
    }
}

TEST(Ensemble, ThreadCountDoesNotChangeBytes)
{
    PulseSequence seq;
    seq.n_pulses = 3;
    const EmitterParams p;
    const auto g = CorrelatorGrid::defaults_for(seq);
    const auto freqs = default_frequencies(seq.interpulse_delay, 61);
    const DetuningModel m{units::mhz_to_rad(5.0), units::mhz_to_rad(20.0), 24, 77};
    SpectrumOptions one, many;
    one.threads = 1;
    many.threads = 5;
    const auto a = ensemble_spectrum(m, seq, p, g, freqs, one);
    const auto b = ensemble_spectrum(m, seq, p, g, freqs, many);
    EXPECT_EQ(std::memcmp(a.q.data(), b.q.data(), a.q.size() * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(a.stderr_q.data(), b.stderr_q.data(), a.q.size() * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(a.p1.data(), b.p1.data(), a.q.size() * sizeof(double)), 0);
}

TEST(Ensemble, StderrScalesWithRealizations)
{
    PulseSequence seq;
    seq.n_pulses = 3;
    const EmitterParams p;
    const auto g = CorrelatorGrid::defaults_for(seq);
    const auto freqs = default_frequencies(seq.interpulse_delay, 61);
    DetuningModel m{0.0, units::mhz_to_rad(fwhm_to_sigma(30.0)), 200, 12};
    const auto a = ensemble_spectrum(m, seq, p, g, freqs);
    m.n_realizations = 400;
    const auto b = ensemble_spectrum(m, seq, p, g, freqs);
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / v.size();
    };
    EXPECT_NEAR(mean(b.stderr_q) / mean(a.stderr_q), 1.0 / std::sqrt(2.0), 0.15 / std::sqrt(2.0));
}

TEST(Uncontrolled, LifetimeLimitedLine)
{
    PulseSequence seq;
    const EmitterParams p;
    const auto freqs = linspace(-60e6, 60e6, 241);
    const auto s = uncontrolled_reference(DetuningModel{}, seq, p, long_grid(400e-9, 0.1e-9), freqs);
    EXPECT_NEAR(*std::max_element(s.q.begin(), s.q.end()), 1.0, 1e-12);
    const auto r = fit(ModelSpec::lorentzian_sum(1), freqs, s.p1, {s.p1[120], 0.0, 15e6, 0.0});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.params[2] / 12.94e6, 1.0, 0.02);
    EXPECT_NEAR(r.params[1], 0.0, freqs[1] - freqs[0]);
}

TEST(Uncontrolled, VoigtConvolutionOracle)
{
    // Free evolution spectra depend only on f - delta, so the ensemble is a
    // Gaussian convolution of the single-detuning line.
    PulseSequence seq;
    const EmitterParams p;
    const double T = 300e-9;
    const auto g = long_grid(T, 0.1e-9);
    const auto freqs = linspace(-80e6, 80e6, 161);
    const double sigma_hz = fwhm_to_sigma(20e6);
    SpectrumOptions opt;
    opt.mode = EnsembleMode::gauss_hermite;
    opt.quadrature_order = 41;
    opt.normalize = false;
    const auto s = uncontrolled_reference(DetuningModel{0.0, units::hz_to_rad(sigma_hz), 1, 1}, seq, p, g, freqs, opt);

    std::vector<double> oracle(freqs.size(), 0.0);
    const int nd = 4001;
    double wsum = 0.0;
    for (int k = 0; k < nd; ++k) {
        const double d = -8 * sigma_hz + 16 * sigma_hz * k / (nd - 1);
        const double w = std::exp(-0.5 * d * d / (sigma_hz * sigma_hz));
        wsum += w;
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            const auto o = free_decay_oracle(units::hz_to_rad(d), freqs[i], T);
            oracle[i] += w * (o.p2 - o.p1);
        }
    }
    double peak = 0.0;
    for (auto& v : oracle) {
        v /= wsum;
        peak = std::max(peak, v);
    }
    for (std::size_t i = 0; i < freqs.size(); ++i)
        EXPECT_NEAR(s.q[i], oracle[i], 5e-3 * peak) << freqs[i];

    FitOptions fo;
    const auto pv = fit(ModelSpec::pseudo_voigt(), freqs, s.q, {peak, 0.0, 25e6, 0.5, 0.0}, fo);
    EXPECT_TRUE(pv.converged);
    EXPECT_GT(pv.params[2], 20e6);
}

TEST(Uncontrolled, BroadEnsembleApproachesGaussian)
{
    PulseSequence seq;
    const EmitterParams p;
    const auto freqs = linspace(-600e6, 600e6, 241);
    CorrelatorGrid g = long_grid(200e-9, 0.1e-9);
    SpectrumOptions opt;
    opt.mode = EnsembleMode::gauss_hermite;
    opt.quadrature_order = 61;
    const DetuningModel m{units::mhz_to_rad(40.0), units::mhz_to_rad(fwhm_to_sigma(300.0)), 1, 1};
    const auto s = uncontrolled_reference(m, seq, p, g, freqs, opt);
    const auto r = fit(ModelSpec::gaussian(), freqs, s.q, {1.0, 0.0, 250e6, 0.0});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.params[2] / 300e6, 1.0, 0.05);
    EXPECT_NEAR(r.params[1], 40e6, 2e6);
}

TEST(Frequencies, DefaultGrid)
{
    const auto f = default_frequencies(10e-9);
    ASSERT_EQ(f.size(), 401u);
    EXPECT_NEAR(f.front(), -150e6, 1e-6);
    EXPECT_NEAR(f.back(), 150e6, 1e-6);
    EXPECT_EQ(f[200], 0.0);
}
