#include "fbent/fwi.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fbent/error.hpp"

namespace fbent {
namespace {

double optical_sum(const std::vector<ArmSegment>& arm)
{
    double s = 0.0;
    for (const auto& seg : arm)
        s += seg.index * seg.length;
    return s;
}

double reduced_sum(const std::vector<ArmSegment>& arm)
{
    double s = 0.0;
    for (const auto& seg : arm)
        s += seg.length / seg.index;
    return s;
}

template <class F>
double integrate(F f, double lo, double hi, double tol)
{
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, tol, &err);
}

} // namespace

void FwiDesign::validate() const
{
    for (const auto* arm : {&long_arm, &short_arm})
        for (const auto& seg : *arm) {
            if (!(seg.length >= 0.0))
                throw ConfigError("arm segment length must be >= 0");
            if (!(seg.index >= 1.0))
                throw ConfigError("arm segment index must be >= 1");
        }
    if (!(input_index >= 1.0))
        throw ConfigError("input index must be >= 1");
}

double FwiDesign::widening_coefficient() const
{
    return reduced_sum(long_arm) - reduced_sum(short_arm);
}

FwiDesign reference_design()
{
    FwiDesign d;
    d.long_arm = {{0.01, 1.0}, {0.10, 1.5007}, {0.01, 1.0}};
    d.short_arm = {{0.0785, 1.0}};
    d.double_pass = true;
    return d;
}

double opd(const FwiDesign& design, double alpha)
{
    design.validate();
    if (std::abs(alpha) > 0.1)
        warn("opd: |alpha| > 0.1 rad, second-order Taylor model may be inaccurate");
    const double s = std::sin(alpha);
    const double n0 = design.input_index;
    const double first = optical_sum(design.long_arm) - optical_sum(design.short_arm);
    return design.pass_factor() * (first - 0.5 * n0 * n0 * s * s * design.widening_coefficient());
}

DemuxDelay demux_delay(double delta_L)
{
    if (!(delta_L > 0.0))
        throw std::invalid_argument("demux_delay: path difference must be positive");
    return {delta_L / kSpeedOfLight, std::numbers::pi * kSpeedOfLight / delta_L};
}

double demux_length(double delta_omega)
{
    if (!(delta_omega > 0.0))
        throw std::invalid_argument("demux_length: bin spacing must be positive");
    return std::numbers::pi * kSpeedOfLight / delta_omega;
}

FwiDesign solve_widened(double n_glass, const AirGaps& gaps, double delta_L_target, bool double_pass)
{
    if (!(n_glass > 1.0))
        throw ConfigError("solve_widened: glass index must exceed 1");
    if (!(delta_L_target > 0.0))
        throw ConfigError("solve_widened: target path difference must be positive");
    if (gaps.long_arm < 0.0 || gaps.short_arm < 0.0)
        throw ConfigError("solve_widened: air gaps must be >= 0");
    const double m = double_pass ? 2.0 : 1.0;
    // Subtracting the two conditions leaves g (n - 1/n) = dL/m.
    const double g = delta_L_target / (m * (n_glass - 1.0 / n_glass));
    const double s = gaps.long_arm + g / n_glass - gaps.short_arm;
    if (!(g >= 0.0))
        throw ConfigError("solve_widened: infeasible, glass length g < 0");
    if (!(s >= 0.0))
        throw ConfigError("solve_widened: infeasible, short-arm length s < 0");

    FwiDesign d;
    d.double_pass = double_pass;
    if (gaps.long_arm > 0.0)
        d.long_arm.push_back({gaps.long_arm, 1.0});
    d.long_arm.push_back({g, n_glass});
    if (gaps.short_arm > 0.0)
        d.short_arm.push_back({gaps.short_arm, 1.0});
    d.short_arm.push_back({s, 1.0});
    return d;
}

FwiDesign unwidened_design(double delta_L_target, double short_arm_length, bool double_pass)
{
    FwiDesign d;
    d.double_pass = double_pass;
    d.short_arm = {{short_arm_length, 1.0}};
    d.long_arm = {{short_arm_length + delta_L_target / d.pass_factor(), 1.0}};
    d.validate();
    return d;
}

double demux_visibility(const FwiDesign& design, double gamma, double delta_omega, double alpha_spread,
                        const DemuxVisibilityOptions& options)
{
    design.validate();
    if (!(gamma >= 0.0) || !(delta_omega > 0.0) || !(alpha_spread >= 0.0))
        throw std::invalid_argument("demux_visibility: need gamma >= 0, delta_omega > 0, alpha_spread >= 0");
    const double omega_b = 2.0 * std::numbers::pi * kSpeedOfLight / options.carrier_wavelength;
    const double dl0 = opd(design, 0.0);
    const double tol = options.relative_tolerance;

    // Lorentzian average of exp(i d dl / c) over the detuning d, normalized.
    auto bin_factor = [&](double dl) -> std::complex<double> {
        if (gamma == 0.0)
            return 1.0;
        const double hw = 0.5 * gamma;
        const double span = options.lorentz_span * gamma;
        auto lorentz = [&](double d) { return hw / std::numbers::pi / (d * d + hw * hw); };
        const double norm = integrate(lorentz, -span, span, tol);
        auto re = [&](double d) { return lorentz(d) * std::cos(d * dl / kSpeedOfLight); };
        auto im = [&](double d) { return lorentz(d) * std::sin(d * dl / kSpeedOfLight); };
        return {integrate(re, -span, span, tol) / norm, integrate(im, -span, span, tol) / norm};
    };
    // Port-0 contrast <cos(phase)> relative to the tuned bin center.
    auto contrast = [&](double dl, std::complex<double> factor) {
        const double base = omega_b * (dl - dl0) / kSpeedOfLight;
        return (std::polar(1.0, base) * factor).real();
    };

    if (alpha_spread == 0.0)
        return contrast(dl0, bin_factor(dl0));

    // opd depends only on alpha^2; the quadratic coefficient is evaluated once.
    const double m = design.pass_factor();
    const double n0 = design.input_index;
    const double coeff = 0.5 * m * n0 * n0 * design.widening_coefficient();
    const double lim = 6.0 * alpha_spread;
    // The bin factor moves by parts per million across the opd range; a quadratic through
    // three exact evaluations keeps the fast carrier phase as the only oscillation to resolve.
    const double s_lim = std::sin(lim);
    const double x2 = -coeff * s_lim * s_lim;
    const std::complex<double> f0 = bin_factor(dl0), f1 = bin_factor(dl0 + 0.5 * x2), f2 = bin_factor(dl0 + x2);
    auto factor_at = [&](double x) -> std::complex<double> {
        if (x2 == 0.0)
            return f0;
        const double u = x / x2;
        return f0 * (2.0 * (u - 0.5) * (u - 1.0)) + f1 * (-4.0 * u * (u - 1.0)) + f2 * (2.0 * u * (u - 0.5));
    };
    auto gauss = [&](double a) {
        return std::exp(-0.5 * a * a / (alpha_spread * alpha_spread)) /
               (std::sqrt(2.0 * std::numbers::pi) * alpha_spread);
    };
    auto g = [&](double a) {
        const double s = std::sin(a);
        const double x = -coeff * s * s;
        return gauss(a) * contrast(dl0 + x, factor_at(x));
    };
    const double norm = integrate(gauss, 0.0, lim, tol);
    return integrate(g, 0.0, lim, tol) / norm;
}

} // namespace fbent
