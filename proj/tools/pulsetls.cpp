// pulsetls: spectra, sweeps, probe traces, fits and pulse calibration.
//
// Exit codes: 0 success, 2 configuration or parse error, 3 numerical error,
// 4 fit did not converge.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pulsetls/cli.hpp"

namespace cli = pulsetls::cli;
using pulsetls::ConfigError;
using pulsetls::NumericalError;

namespace {

struct Common {
    std::string config;
    std::string preset;
    bool emit_config = false;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
    std::optional<std::string> prefix;
    bool svg = false;
    std::optional<double> tau_ns;
    std::optional<int> n_pulses;
    std::optional<double> fwhm_mhz;
    std::optional<double> delta0_mhz;
    std::optional<double> angle_pi;
    std::optional<int> realizations;
    std::optional<std::string> mode;
    std::optional<int> points;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "JSON run configuration");
    app->add_option("--preset", c.preset, "named preset: default, fig1c, figS1, fig2, fig5, lifetime");
    app->add_flag("--emit-config", c.emit_config, "print the resolved configuration as JSON and exit");
    app->add_option("--seed", c.seed, "ensemble seed");
    app->add_option("--threads", c.threads, "worker threads (0: all cores)");
    app->add_option("--out-dir", c.out_dir, "output directory");
    app->add_option("--prefix", c.prefix, "output file prefix");
    app->add_flag("--svg", c.svg, "also write SVG plots");
    app->add_option("--tau-ns", c.tau_ns, "interpulse delay (ns)");
    app->add_option("--n-pulses", c.n_pulses, "number of pulses");
    app->add_option("--fwhm-mhz", c.fwhm_mhz, "ensemble FWHM (MHz)");
    app->add_option("--delta0-mhz", c.delta0_mhz, "mean detuning (MHz)");
    app->add_option("--angle-pi", c.angle_pi, "pulse rotation angle in units of pi");
    app->add_option("--realizations", c.realizations, "Monte Carlo realizations");
    app->add_option("--mode", c.mode, "monte_carlo or gauss_hermite");
    app->add_option("--points", c.points, "number of frequency points");
}

cli::RunConfig resolve_config(const Common& o)
{
    cli::RunConfig c = o.preset.empty() ? cli::RunConfig{} : cli::preset_config(o.preset);
    if (!o.config.empty())
        c = cli::load_config(o.config, c);
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    if (o.out_dir)
        c.out_dir = *o.out_dir;
    if (o.prefix)
        c.prefix = *o.prefix;
    if (o.svg)
        c.svg = true;
    if (o.tau_ns)
        c.tau_ns = *o.tau_ns;
    if (o.n_pulses)
        c.n_pulses = *o.n_pulses;
    if (o.fwhm_mhz)
        c.fwhm_mhz = *o.fwhm_mhz;
    if (o.delta0_mhz)
        c.delta0_mhz = *o.delta0_mhz;
    if (o.angle_pi)
        c.angle_pi = *o.angle_pi;
    if (o.realizations)
        c.realizations = *o.realizations;
    if (o.mode)
        c.mode = *o.mode;
    if (o.points)
        c.f_points = *o.points;
    cli::resolve(c);
    return c;
}

bool emit(const Common& o, const cli::RunConfig& c)
{
    if (o.emit_config)
        std::cout << cli::to_json(c).dump(2) << '\n';
    return o.emit_config;
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        double v = 0.0;
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
            throw ConfigError("cannot parse '" + cell + "' as a number");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pulse-train two-level emitter simulator"};
    app.require_subcommand(1);

    Common spectrum_opt;
    auto* spectrum = app.add_subcommand("spectrum", "ensemble emission spectrum P1, P2, Q");
    add_common(spectrum, spectrum_opt);

    Common sweep_opt;
    std::string axis;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "spectra over one parameter with a summary table");
    add_common(sweep, sweep_opt);
    sweep->add_option("--axis", axis, "tau | delta0 | n_pulses | angle")->required();
    sweep->add_option("--values", values, "comma-separated values (ns, MHz, count, or units of pi)")->required();

    Common trace_opt;
    auto* trace = app.add_subcommand("trace", "time trace and probe scans over windows");
    add_common(trace, trace_opt);

    std::string data_file;
    std::string model = "lorentzian_sum";
    int peaks = 1;
    std::vector<double> init;
    double fit_tau_ns = 0.0;
    std::string x_col, y_col, fit_out;
    double x_unit_hz = 0.0;
    auto* fitcmd = app.add_subcommand("fit", "fit a model to CSV data");
    fitcmd->add_option("data", data_file, "CSV file with a header row")->required();
    fitcmd->add_option("--model", model, "lorentzian_sum | pseudo_voigt | gaussian | exponential | bi_exponential");
    fitcmd->add_option("--peaks", peaks, "Lorentzian components");
    fitcmd->add_option("--init", init, "initial parameters")->delimiter(',');
    fitcmd->add_option("--tau-ns", fit_tau_ns, "seed a comb of Lorentzians at n/(2 tau) and report satellites");
    fitcmd->add_option("--x-col", x_col, "x column (default: first)");
    fitcmd->add_option("--y-col", y_col, "y column (default: second)");
    fitcmd->add_option("--x-unit-hz", x_unit_hz, "size of one x unit in Hz (default 1e6 for *_mhz columns)");
    fitcmd->add_option("--out", fit_out, "write <out>.txt and <out>.json reports");

    double cal_fwhm_ns = 1.6;
    double cal_angle_pi = 1.0;
    std::string cal_out;
    auto* calcmd = app.add_subcommand("calibrate", "pulse amplitude for a target rotation");
    calcmd->add_option("--fwhm-ns", cal_fwhm_ns, "envelope FWHM (ns)");
    calcmd->add_option("--angle-pi", cal_angle_pi, "rotation angle in units of pi");
    calcmd->add_option("--out", cal_out, "write the amplitude sweep to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (spectrum->parsed()) {
            const auto c = resolve_config(spectrum_opt);
            if (emit(spectrum_opt, c))
                return 0;
            const auto s = cli::run_spectrum(c);
            std::cout << "wrote " << cli::output_path(c, "spectrum", "csv") << " (" << s.size() << " points)\n";
        } else if (sweep->parsed()) {
            const auto c = resolve_config(sweep_opt);
            if (emit(sweep_opt, c))
                return 0;
            const auto rows = cli::run_sweep(c, axis, parse_list(values));
            std::cout << cli::sweep_summary_csv(rows);
        } else if (trace->parsed()) {
            const auto c = resolve_config(trace_opt);
            if (emit(trace_opt, c))
                return 0;
            const auto run = cli::run_trace(c);
            std::cout << "wrote " << cli::output_path(c, "trace", "csv") << '\n';
            for (const auto& curve : run.curves)
                std::cout << "wrote " << cli::output_path(c, curve.window.name, "csv") << '\n';
        } else if (fitcmd->parsed()) {
            const auto data = cli::read_csv(data_file);
            const auto& x = x_col.empty() ? data.columns.at(0) : data.column(x_col);
            if (data.columns.size() < 2 && y_col.empty())
                throw ConfigError("data file needs at least two columns");
            const auto& y = y_col.empty() ? data.columns.at(1) : data.column(y_col);
            const std::string xname = x_col.empty() ? data.header.at(0) : x_col;
            if (x_unit_hz <= 0.0)
                x_unit_hz = xname.size() > 4 && xname.ends_with("_mhz") ? 1e6 : 1.0;
            const double tau = fit_tau_ns * 1e-9;
            pulsetls::ModelSpec spec;
            std::vector<double> p0 = init;
            if (tau > 0.0 && model == "lorentzian_sum" && init.empty()) {
                peaks = 7;
                spec = pulsetls::ModelSpec::lorentzian_sum(peaks);
                p0 = pulsetls::satellite_init(x, y, tau, 3, x_unit_hz);
            } else {
                spec = cli::parse_model(model, peaks);
                if (p0.empty())
                    p0 = pulsetls::auto_init(spec, x, y);
            }
            const auto r = pulsetls::fit(spec, x, y, p0);
            const auto report = cli::fit_report_json(spec, r, x_unit_hz, tau);
            const auto text = cli::fit_report_text(report);
            std::cout << text;
            if (!fit_out.empty()) {
                cli::write_file(fit_out + ".txt", text);
                cli::write_file(fit_out + ".json", report.dump(2) + "\n");
            }
            if (!r.converged) {
                std::cerr << "fit did not converge: " << r.message << '\n';
                return 4;
            }
        } else if (calcmd->parsed()) {
            const auto cal = cli::calibrate(cal_fwhm_ns, cal_angle_pi);
            std::cout << "peak amplitude: " << cli::format_number(cal.peak_amplitude) << " rad/s ("
                      << cli::format_number(cal.peak_mhz) << " MHz)\n"
                      << "truncation factor: " << cli::format_number(cal.truncation_factor) << '\n'
                      << "sweep maximum: " << cli::format_number(cal.fit.params[1]) << " rad/s ("
                      << cli::format_number(cal.fit.params[1] / cal.pi_amplitude) << " of the pi amplitude)\n";
            if (!cal_out.empty()) {
                cli::CsvWriter w({"amplitude_rad_s", "excited_population"});
                for (std::size_t i = 0; i < cal.sweep_amplitude.size(); ++i)
                    w.row({cal.sweep_amplitude[i], cal.sweep_population[i]});
                cli::write_file(cal_out, w.str());
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
