#pragma once

// Peak and decay models with a Levenberg-Marquardt least-squares engine.
//
// Parameter layouts (x in any unit, widths are FWHMs in the same unit):
//   lorentzian_sum(n)  a_1 c_1 w_1 ... a_n c_n w_n  baseline
//   pseudo_voigt       a c w eta baseline
//   gaussian           a c w baseline
//   exponential        a T baseline
//   bi_exponential     a_1 T_1 a_2 T_2 baseline
//   trace_model        a T_dark baseline   (times a fixed template trace)

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pulsetls/core.hpp"

namespace pulsetls {

enum class ModelKind { lorentzian_sum, pseudo_voigt, gaussian, exponential, bi_exponential, trace_model };

inline const char* to_string(ModelKind k)
{
    switch (k) {
    case ModelKind::lorentzian_sum: return "lorentzian_sum";
    case ModelKind::pseudo_voigt: return "pseudo_voigt";
    case ModelKind::gaussian: return "gaussian";
    case ModelKind::exponential: return "exponential";
    case ModelKind::bi_exponential: return "bi_exponential";
    case ModelKind::trace_model: return "trace_model";
    }
    return "?";
}

struct ModelSpec {
    ModelKind kind = ModelKind::lorentzian_sum;
    int n_peaks = 1;
    // trace_model only: sampled probe-off trace, linearly interpolated
    std::vector<double> template_x;
    std::vector<double> template_y;

    static ModelSpec lorentzian_sum(int n)
    {
        if (n < 1 || n > 9)
            throw ConfigError("lorentzian_sum: n must be in [1, 9]");
        return {ModelKind::lorentzian_sum, n, {}, {}};
    }
    static ModelSpec pseudo_voigt() { return {ModelKind::pseudo_voigt, 1, {}, {}}; }
    static ModelSpec gaussian() { return {ModelKind::gaussian, 1, {}, {}}; }
    static ModelSpec exponential() { return {ModelKind::exponential, 1, {}, {}}; }
    static ModelSpec bi_exponential() { return {ModelKind::bi_exponential, 1, {}, {}}; }
    static ModelSpec trace_model(std::vector<double> x, std::vector<double> y)
    {
        if (x.size() < 2 || x.size() != y.size())
            throw ConfigError("trace_model: template needs matching x/y with at least two points");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1]))
                throw ConfigError("trace_model: template x must be strictly increasing");
        return {ModelKind::trace_model, 1, std::move(x), std::move(y)};
    }

    std::size_t parameter_count() const
    {
        switch (kind) {
        case ModelKind::lorentzian_sum: return 3 * static_cast<std::size_t>(n_peaks) + 1;
        case ModelKind::pseudo_voigt: return 5;
        case ModelKind::gaussian: return 4;
        case ModelKind::exponential: return 3;
        case ModelKind::bi_exponential: return 5;
        case ModelKind::trace_model: return 3;
        }
        return 0;
    }

    std::vector<std::string> parameter_names() const
    {
        switch (kind) {
        case ModelKind::lorentzian_sum: {
            std::vector<std::string> out;
            for (int k = 1; k <= n_peaks; ++k)
                for (const char* p : {"amplitude_", "center_", "fwhm_"})
                    out.push_back(p + std::to_string(k));
            out.push_back("baseline");
            return out;
        }
        case ModelKind::pseudo_voigt: return {"amplitude", "center", "fwhm", "eta", "baseline"};
        case ModelKind::gaussian: return {"amplitude", "center", "fwhm", "baseline"};
        case ModelKind::exponential: return {"amplitude", "decay_time", "baseline"};
        case ModelKind::bi_exponential: return {"amplitude_1", "decay_time_1", "amplitude_2", "decay_time_2", "baseline"};
        case ModelKind::trace_model: return {"amplitude", "dark_decay_time", "baseline"};
        }
        return {};
    }

    enum class Bound { free, positive, unit_interval };

    std::vector<Bound> bounds() const
    {
        std::vector<Bound> b(parameter_count(), Bound::free);
        switch (kind) {
        case ModelKind::lorentzian_sum:
            for (int k = 0; k < n_peaks; ++k)
                b[3 * k + 2] = Bound::positive;
            break;
        case ModelKind::pseudo_voigt:
            b[2] = Bound::positive;
            b[3] = Bound::unit_interval;
            break;
        case ModelKind::gaussian: b[2] = Bound::positive; break;
        case ModelKind::exponential: b[1] = Bound::positive; break;
        case ModelKind::bi_exponential:
            b[1] = Bound::positive;
            b[3] = Bound::positive;
            break;
        case ModelKind::trace_model: b[1] = Bound::positive; break;
        }
        return b;
    }

    void check(const std::vector<double>& params) const
    {
        if (params.size() != parameter_count())
            throw ConfigError(std::string(to_string(kind)) + ": expected " + std::to_string(parameter_count()) +
                              " parameters, got " + std::to_string(params.size()));
        const auto b = bounds();
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!std::isfinite(params[i]))
                throw ConfigError("model parameters must be finite");
            if (b[i] == Bound::positive && !(params[i] > 0.0))
                throw ConfigError(parameter_names()[i] + " must be positive");
            if (b[i] == Bound::unit_interval && !(params[i] >= 0.0 && params[i] <= 1.0))
                throw ConfigError(parameter_names()[i] + " must lie in [0, 1]");
        }
    }
};

namespace detail {

inline double lorentz(double x, double c, double w)
{
    const double h = 0.5 * w;
    return h * h / ((x - c) * (x - c) + h * h);
}

inline double gauss(double x, double c, double w)
{
    const double u = (x - c) / w;
    return std::exp(-4.0 * std::numbers::ln2 * u * u);
}

inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x)
{
    if (x <= xs.front())
        return ys.front();
    if (x >= xs.back())
        return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double f = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + f * (ys[j] - ys[j - 1]);
}

inline double eval_point(const ModelSpec& spec, const double* p, double x)
{
    switch (spec.kind) {
    case ModelKind::lorentzian_sum: {
        double y = p[3 * spec.n_peaks];
        for (int k = 0; k < spec.n_peaks; ++k)
            y += p[3 * k] * lorentz(x, p[3 * k + 1], p[3 * k + 2]);
        return y;
    }
    case ModelKind::pseudo_voigt:
        return p[4] + p[0] * (p[3] * lorentz(x, p[1], p[2]) + (1.0 - p[3]) * gauss(x, p[1], p[2]));
    case ModelKind::gaussian: return p[3] + p[0] * gauss(x, p[1], p[2]);
    case ModelKind::exponential: return p[2] + p[0] * std::exp(-x / p[1]);
    case ModelKind::bi_exponential: return p[4] + p[0] * std::exp(-x / p[1]) + p[2] * std::exp(-x / p[3]);
    case ModelKind::trace_model:
        return p[2] + p[0] * interpolate(spec.template_x, spec.template_y, x) * std::exp(-x / p[1]);
    }
    return 0.0;
}

}  // namespace detail

inline std::vector<double> eval_model(const ModelSpec& spec, const std::vector<double>& params,
                                      const std::vector<double>& x)
{
    spec.check(params);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = detail::eval_point(spec, params.data(), x[i]);
    return y;
}

struct FitOptions {
    int max_iterations = 500;
    double lambda_start = 1e-3;
    double relative_tolerance = 1e-10;
    double step_tolerance = 1e-12;
    double fd_step = 1e-6;
};

struct FitResult {
    std::vector<double> params;
    Eigen::MatrixXd covariance;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;

    double sigma(std::size_t i) const
    {
        return covariance.rows() > static_cast<Eigen::Index>(i) ? std::sqrt(std::max(0.0, covariance(i, i))) : 0.0;
    }
};

namespace detail {

// Bounded parameters are optimized through log / logistic transforms.
inline double to_internal(ModelSpec::Bound b, double v)
{
    switch (b) {
    case ModelSpec::Bound::positive: return std::log(v);
    case ModelSpec::Bound::unit_interval: {
        const double e = std::clamp(v, 1e-12, 1.0 - 1e-12);
        return std::log(e / (1.0 - e));
    }
    default: return v;
    }
}

inline double to_external(ModelSpec::Bound b, double u)
{
    switch (b) {
    case ModelSpec::Bound::positive: return std::exp(u);
    case ModelSpec::Bound::unit_interval: return 1.0 / (1.0 + std::exp(-u));
    default: return u;
    }
}

class Problem {
public:
    Problem(const ModelSpec& spec, const std::vector<double>& x, const std::vector<double>& y,
            const std::vector<double>& weights)
        : spec_(spec), x_(x), y_(y), sw_(x.size(), 1.0), bounds_(spec.bounds())
    {
        if (!weights.empty()) {
            if (weights.size() != x.size())
                throw ConfigError("fit: weights must match the data length");
            for (std::size_t i = 0; i < weights.size(); ++i) {
                if (!(weights[i] >= 0.0))
                    throw ConfigError("fit: weights must be non-negative");
                sw_[i] = std::sqrt(weights[i]);
            }
        }
    }

    std::vector<double> external(const Eigen::VectorXd& u) const
    {
        std::vector<double> p(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i)
            p[i] = to_external(bounds_[i], u[i]);
        return p;
    }

    Eigen::VectorXd internal(const std::vector<double>& p) const
    {
        Eigen::VectorXd u(p.size());
        for (std::size_t i = 0; i < p.size(); ++i)
            u[i] = to_internal(bounds_[i], p[i]);
        return u;
    }

    Eigen::VectorXd residual_external(const std::vector<double>& p) const
    {
        Eigen::VectorXd r(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i)
            r[i] = sw_[i] * (detail::eval_point(spec_, p.data(), x_[i]) - y_[i]);
        return r;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& u) const { return residual_external(external(u)); }

    // Central differences with a relative step.
    template <class R>
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, double rel, R&& res) const
    {
        Eigen::MatrixXd J(x_.size(), u.size());
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            const double h = rel * std::max(std::abs(u[j]), 1.0);
            Eigen::VectorXd up = u, dn = u;
            up[j] += h;
            dn[j] -= h;
            J.col(j) = (res(up) - res(dn)) / (2.0 * h);
        }
        return J;
    }

    std::size_t size() const { return x_.size(); }

private:
    const ModelSpec& spec_;
    const std::vector<double>& x_;
    const std::vector<double>& y_;
    std::vector<double> sw_;
    std::vector<ModelSpec::Bound> bounds_;
};

}  // namespace detail

/// Levenberg-Marquardt fit. Non-convergence is reported, never thrown.
inline FitResult fit(const ModelSpec& spec, const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& weights, const std::vector<double>& init,
                     const FitOptions& opt = {})
{
    spec.check(init);
    if (x.size() != y.size())
        throw ConfigError("fit: x and y lengths differ");
    if (x.size() < init.size())
        throw ConfigError("fit: fewer data points than parameters");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw ConfigError("fit: data must be finite");

    const detail::Problem prob(spec, x, y, weights);
    const auto res = [&](const Eigen::VectorXd& v) { return prob.residual(v); };
    Eigen::VectorXd u = prob.internal(init);
    Eigen::VectorXd r = res(u);
    double cost = r.squaredNorm();
    double lambda = opt.lambda_start;

    FitResult out;
    out.message = "iteration limit reached";
    int it = 0;
    bool done = false;
    while (it < opt.max_iterations && !done) {
        ++it;
        const Eigen::MatrixXd J = prob.jacobian(u, opt.fd_step, res);
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (cost == 0.0) {
            out.converged = true;
            out.message = "exact fit";
            break;
        }
        // Inner loop: raise the damping until a step lowers the cost.
        while (true) {
            Eigen::MatrixXd M = A;
            for (Eigen::Index i = 0; i < M.rows(); ++i)
                M(i, i) += lambda * std::max(A(i, i), 1e-300);
            const Eigen::VectorXd step = M.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                if (lambda > 1e30) {
                    out.message = "singular normal equations";
                    done = true;
                    break;
                }
                continue;
            }
            const double unorm = u.norm();
            if (step.norm() < opt.step_tolerance * (unorm + opt.step_tolerance)) {
                out.converged = true;
                out.message = "step below tolerance";
                done = true;
                break;
            }
            const Eigen::VectorXd trial = u + step;
            const Eigen::VectorXd rt = res(trial);
            const double ct = rt.allFinite() ? rt.squaredNorm() : std::numeric_limits<double>::infinity();
            if (ct < cost) {
                const double rel = (cost - ct) / cost;
                u = trial;
                r = rt;
                cost = ct;
                lambda = std::max(lambda / 10.0, 1e-300);
                if (rel < opt.relative_tolerance) {
                    out.converged = true;
                    out.message = "relative residual change below tolerance";
                    done = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e30) {
                // No descent left at machine precision.
                out.converged = true;
                out.message = "no further decrease";
                done = true;
                break;
            }
        }
    }

    out.params = prob.external(u);
    out.iterations = it;
    out.residual_norm = std::sqrt(cost);
    const auto bounds = spec.bounds();
    for (std::size_t i = 0; i < out.params.size(); ++i)
        if (!std::isfinite(out.params[i]) || (bounds[i] == ModelSpec::Bound::positive && !(out.params[i] > 0.0))) {
            out.converged = false;
            out.message = "parameter ran to a bound";
            out.covariance = Eigen::MatrixXd::Constant(out.params.size(), out.params.size(), NAN);
            return out;
        }

    // Gauss-Newton covariance in external parameters.
    const std::size_t m = prob.size();
    const std::size_t n = out.params.size();
    Eigen::VectorXd p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = out.params[i];
    const auto res_ext = [&](const Eigen::VectorXd& v) {
        return prob.residual_external(std::vector<double>(v.data(), v.data() + v.size()));
    };
    const Eigen::MatrixXd Je = prob.jacobian(p, opt.fd_step, res_ext);
    const double s2 = m > n ? cost / static_cast<double>(m - n) : 0.0;
    const Eigen::MatrixXd JtJ = Je.transpose() * Je;
    out.covariance = s2 * JtJ.completeOrthogonalDecomposition().pseudoInverse();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

inline FitResult fit(const ModelSpec& spec, const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& init, const FitOptions& opt = {})
{
    return fit(spec, x, y, {}, init, opt);
}

/// Initial parameters for a lorentzian_sum(2*max_order + 1) with centers at
/// 0, +-1/(2 tau), ... . `x_unit` is the size of one x unit in Hz.
inline std::vector<double> satellite_init(const std::vector<double>& x, const std::vector<double>& y, double tau,
                                          int max_order, double x_unit = 1.0)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("satellite_init: need matching x/y data");
    if (!(tau > 0.0) || max_order < 0 || 2 * max_order + 1 > 9)
        throw ConfigError("satellite_init: need tau > 0 and at most 9 components");
    std::vector<double> sorted = y;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double base = sorted[sorted.size() / 2];
    const double spacing = 1.0 / (2.0 * tau) / x_unit;
    std::vector<double> p;
    for (int n = -max_order; n <= max_order; ++n) {
        const double c = n * spacing;
        std::size_t best = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            if (std::abs(x[i] - c) < std::abs(x[best] - c))
                best = i;
        const double a = y[best] - base;
        p.insert(p.end(), {a != 0.0 ? a : 1e-12, c, spacing / 3.0});
    }
    p.push_back(base);
    return p;
}

struct Satellite {
    int order = 0;
    double center = 0.0;     // Hz
    double predicted = 0.0;  // n / (2 tau), Hz
    double residual = 0.0;   // center - predicted, Hz
    double amplitude = 0.0;
};

/// Pairs every non-central fitted component with the nearest n/(2 tau).
inline std::vector<Satellite> extract_satellites(const FitResult& result, double tau, double x_unit = 1.0)
{
    if (!(tau > 0.0))
        throw ConfigError("extract_satellites: tau must be positive");
    if (result.params.size() < 4 || result.params.size() % 3 != 1)
        throw ConfigError("extract_satellites: expected a lorentzian_sum fit");
    const double spacing = 1.0 / (2.0 * tau);
    std::vector<Satellite> out;
    const std::size_t n = result.params.size() / 3;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = result.params[3 * k + 1] * x_unit;
        const int order = static_cast<int>(std::lround(c / spacing));
        if (order == 0)
            continue;
        out.push_back({order, c, order * spacing, c - order * spacing, result.params[3 * k]});
    }
    std::sort(out.begin(), out.end(), [](const Satellite& a, const Satellite& b) { return a.center < b.center; });
    return out;
}

struct Linewidth {
    std::string component;
    double fwhm_mhz = 0.0;
    double sigma_mhz = 0.0;
};

/// FWHM of every peak component in MHz with the 1-sigma uncertainty.
inline std::vector<Linewidth> linewidth_report(const ModelSpec& spec, const FitResult& result, double x_unit = 1.0)
{
    spec.check(result.params);
    const double scale = x_unit / 1e6;
    std::vector<Linewidth> out;
    switch (spec.kind) {
    case ModelKind::lorentzian_sum:
        for (int k = 0; k < spec.n_peaks; ++k) {
            const std::size_t i = 3 * static_cast<std::size_t>(k) + 2;
            out.push_back({"lorentzian_" + std::to_string(k + 1), result.params[i] * std::abs(scale),
                           result.sigma(i) * std::abs(scale)});
        }
        break;
    case ModelKind::pseudo_voigt:
    case ModelKind::gaussian:
        // Both pseudo-Voigt parts share the FWHM, so it is the profile FWHM.
        out.push_back({to_string(spec.kind), result.params[2] * std::abs(scale), result.sigma(2) * std::abs(scale)});
        break;
    default: throw ConfigError("linewidth_report: model has no spectral width");
    }
    return out;
}

/// Starting values from the data: peak models take the largest deviation
/// from the median as the peak, decay models the first/last samples.
inline std::vector<double> auto_init(const ModelSpec& spec, const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 3)
        throw ConfigError("auto_init: need at least three matching x/y points");
    std::vector<double> sorted = y;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double base = sorted[sorted.size() / 2];
    std::size_t k = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i] - base) > std::abs(y[k] - base))
            k = i;
    const double a = y[k] - base != 0.0 ? y[k] - base : 1.0;
    double lo = x[k], hi = x[k];
    for (std::size_t i = k; i-- > 0 && std::abs(y[i] - base) > 0.5 * std::abs(a);)
        lo = x[i];
    for (std::size_t i = k; i < y.size() && std::abs(y[i] - base) > 0.5 * std::abs(a); ++i)
        hi = x[i];
    const double span = std::abs(x.back() - x.front());
    const double w = std::max(hi - lo, span / static_cast<double>(x.size()));
    const double t_scale = std::max(span / 5.0, 1e-300);
    switch (spec.kind) {
    case ModelKind::lorentzian_sum: {
        std::vector<double> p;
        for (int j = 0; j < spec.n_peaks; ++j) {
            const double offset = (j - 0.5 * (spec.n_peaks - 1)) * w;
            p.insert(p.end(), {a, x[k] + offset, w});
        }
        p.push_back(base);
        return p;
    }
    case ModelKind::pseudo_voigt: return {a, x[k], w, 0.5, base};
    case ModelKind::gaussian: return {a, x[k], w, base};
    case ModelKind::exponential: return {y.front() - y.back(), t_scale, y.back()};
    case ModelKind::bi_exponential:
        return {0.5 * (y.front() - y.back()), 0.1 * t_scale, 0.5 * (y.front() - y.back()), t_scale, y.back()};
    case ModelKind::trace_model: return {1.0, 10.0 * span, 0.0};
    }
    return {};
}

/// Narrow feature at the carrier of a spectrum or probe scan.
struct CarrierFeature {
    bool extremum = false;     // local extremum within one grid step of 0
    double value = 0.0;        // y at the grid point nearest the carrier
    double fwhm_hz = 0.0;      // Lorentzian fit over |f| <= 1/(4 tau)
    double center_hz = 0.0;
    double amplitude = 0.0;    // signed; negative for a dip
    double amplitude_sigma = 0.0;
    bool converged = false;
};

inline CarrierFeature carrier_feature(const std::vector<double>& freqs_hz, const std::vector<double>& y, double tau,
                                      const std::vector<double>& stderr_y = {})
{
    if (freqs_hz.size() != y.size() || freqs_hz.size() < 5)
        throw ConfigError("carrier_feature: need at least five matching points");
    if (!(tau > 0.0))
        throw ConfigError("carrier_feature: tau must be positive");
    std::size_t c = 0;
    for (std::size_t i = 1; i < freqs_hz.size(); ++i)
        if (std::abs(freqs_hz[i]) < std::abs(freqs_hz[c]))
            c = i;
    CarrierFeature out;
    out.value = y[c];
    for (std::size_t i = std::max<std::size_t>(c, 2) - 1; i <= std::min(c + 1, y.size() - 2); ++i)
        if ((y[i] - y[i - 1]) * (y[i] - y[i + 1]) > 0.0)
            out.extremum = true;

    const double half = 1.0 / (4.0 * tau);
    std::vector<double> xs, ys, ws;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i)
        if (std::abs(freqs_hz[i]) <= half * (1 + 1e-9)) {
            xs.push_back(freqs_hz[i] / 1e6);
            ys.push_back(y[i]);
            if (!stderr_y.empty())
                ws.push_back(stderr_y[i] > 0.0 ? 1.0 / (stderr_y[i] * stderr_y[i]) : 0.0);
        }
    if (xs.size() < 5)
        throw ConfigError("carrier_feature: fewer than five points within 1/(4 tau) of the carrier");
    if (!ws.empty() && *std::max_element(ws.begin(), ws.end()) == 0.0)
        ws.clear();
    const double edge = 0.5 * (ys.front() + ys.back());
    const double a0 = out.value - edge != 0.0 ? out.value - edge : 1e-12;
    const auto r = fit(ModelSpec::lorentzian_sum(1), xs, ys, ws, std::vector<double>{a0, 0.0, half / 2e6, edge});
    out.converged = r.converged;
    out.amplitude = r.params[0];
    out.amplitude_sigma = r.sigma(0);
    out.center_hz = r.params[1] * 1e6;
    out.fwhm_hz = r.params[2] * 1e6;
    return out;
}

/// lorentzian_sum(2 max_order + 1) fit seeded on the comb n/(2 tau), done
/// in MHz; returns the fit and its satellites (centres in Hz).
struct SatelliteFit {
    FitResult fit;
    std::vector<Satellite> satellites;
};

inline SatelliteFit fit_satellites(const std::vector<double>& freqs_hz, const std::vector<double>& y, double tau,
                                   int max_order = 3)
{
    std::vector<double> x(freqs_hz.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = freqs_hz[i] / 1e6;
    const auto spec = ModelSpec::lorentzian_sum(2 * max_order + 1);
    SatelliteFit out;
    out.fit = fit(spec, x, y, satellite_init(x, y, tau, max_order, 1e6));
    out.satellites = extract_satellites(out.fit, tau, 1e6);
    return out;
}

}  // namespace pulsetls
