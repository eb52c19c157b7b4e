#include "fbent/jti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "fbent/error.hpp"

namespace fbent {

void SourceConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw ConfigError(what);
    };
    require(std::isfinite(delta_omega) && delta_omega > 0.0, "delta_omega must be positive");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
    require(std::isfinite(theta), "theta must be finite");
    require(std::isfinite(pair_rate) && pair_rate >= 0.0, "pair_rate must be non-negative");
    require(std::isfinite(window) && window > 0.0, "window must be positive");
    require(std::isfinite(clock_offset), "clock_offset must be finite");
    if (delta_omega / gamma < 10.0) {
        std::ostringstream os;
        os << "delta_omega/gamma = " << delta_omega / gamma
           << " < 10: frequency bins are not well resolved";
        warn(os.str());
    }
}

double jti_value(double ts, double ti, const SourceConfig& cfg)
{
    return std::exp(-cfg.gamma * std::abs(ts - ti)) *
           (1.0 + std::cos(cfg.delta_omega * (ts + ti) + cfg.theta));
}

JtiHistogram histogram(std::span<const TimePair> pairs, double bin_width)
{
    if (!(bin_width > 0.0))
        throw std::invalid_argument("histogram: bin_width must be positive");
    JtiHistogram h;
    h.bin_width = bin_width;
    if (pairs.empty())
        return h;
    double lo_s = std::numeric_limits<double>::infinity(), hi_s = -lo_s;
    double lo_i = lo_s, hi_i = hi_s;
    for (const auto& p : pairs) {
        lo_s = std::min(lo_s, p.ts);
        hi_s = std::max(hi_s, p.ts);
        lo_i = std::min(lo_i, p.ti);
        hi_i = std::max(hi_i, p.ti);
    }
    const double fs = std::floor(lo_s / bin_width), fi = std::floor(lo_i / bin_width);
    const auto ns = static_cast<std::size_t>(std::floor(hi_s / bin_width) - fs) + 1;
    const auto ni = static_cast<std::size_t>(std::floor(hi_i / bin_width) - fi) + 1;
    return histogram(pairs, bin_width, fs * bin_width, fi * bin_width, ns, ni);
}

JtiHistogram histogram(std::span<const TimePair> pairs, double bin_width, double t0_s, double t0_i,
                       std::size_t n_s, std::size_t n_i)
{
    if (!(bin_width > 0.0))
        throw std::invalid_argument("histogram: bin_width must be positive");
    JtiHistogram h;
    h.bin_width = bin_width;
    h.t0_s = t0_s;
    h.t0_i = t0_i;
    h.n_s = n_s;
    h.n_i = n_i;
    h.counts.assign(n_s * n_i, 0u);
    for (const auto& p : pairs) {
        const double us = std::floor((p.ts - t0_s) / bin_width);
        const double ui = std::floor((p.ti - t0_i) / bin_width);
        if (us < 0.0 || ui < 0.0 || us >= static_cast<double>(n_s) || ui >= static_cast<double>(n_i))
            continue;
        ++h.at(static_cast<std::size_t>(us), static_cast<std::size_t>(ui));
    }
    return h;
}

JtiHistogram merge(const JtiHistogram& a, const JtiHistogram& b)
{
    if (!a.same_geometry(b))
        throw std::invalid_argument("merge: histogram geometries differ");
    JtiHistogram out = a;
    for (std::size_t k = 0; k < out.counts.size(); ++k)
        out.counts[k] += b.counts[k];
    return out;
}

std::vector<TimePair> fold_pairs(std::span<const TimePair> pairs, double fold_period)
{
    if (!(fold_period > 0.0))
        throw std::invalid_argument("fold_pairs: fold_period must be positive");
    std::vector<TimePair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double k = std::floor((p.ts + p.ti) / (2.0 * fold_period));
        out.push_back({p.ts - k * fold_period, p.ti - k * fold_period});
    }
    return out;
}

JtiHistogram frame_histogram(std::span<const TimePair> folded, double fold_period, double max_delay,
                             double bin_width)
{
    const double t0 = std::floor(-0.5 * max_delay / bin_width) * bin_width;
    const auto n = static_cast<std::size_t>(std::ceil((fold_period + 0.5 * max_delay - t0) / bin_width));
    return histogram(folded, bin_width, t0, t0, n, n);
}

template <class T>
Profile diagonal_profile(const Histogram2D<T>& h, double band)
{
    if (!(band > 0.0))
        throw std::invalid_argument("diagonal_profile: band must be positive");
    Profile p;
    p.step = h.bin_width;
    p.origin = h.t0_s + h.t0_i + h.bin_width;
    if (h.n_s == 0 || h.n_i == 0)
        return p;
    p.values.assign(h.n_s + h.n_i - 1, 0.0);
    const double tol = band + 1e-9 * h.bin_width;
    for (std::size_t is = 0; is < h.n_s; ++is) {
        const double cs = h.center_s(is);
        for (std::size_t ii = 0; ii < h.n_i; ++ii) {
            if (std::abs(cs - h.center_i(ii)) <= tol)
                p.values[is + ii] += static_cast<double>(h.at(is, ii));
        }
    }
    return p;
}

template <class T>
Profile antidiagonal_profile(const Histogram2D<T>& h)
{
    Profile p;
    p.step = h.bin_width;
    if (h.n_s == 0 || h.n_i == 0)
        return p;
    p.origin = h.t0_s - h.t0_i - static_cast<double>(h.n_i - 1) * h.bin_width;
    p.values.assign(h.n_s + h.n_i - 1, 0.0);
    for (std::size_t is = 0; is < h.n_s; ++is)
        for (std::size_t ii = 0; ii < h.n_i; ++ii)
            p.values[is + (h.n_i - 1) - ii] += static_cast<double>(h.at(is, ii));
    return p;
}

template Profile diagonal_profile(const Histogram2D<std::uint32_t>&, double);
template Profile diagonal_profile(const Histogram2D<double>&, double);
template Profile antidiagonal_profile(const Histogram2D<std::uint32_t>&);
template Profile antidiagonal_profile(const Histogram2D<double>&);

Profile crop(const Profile& p, double lo, double hi)
{
    Profile out;
    out.step = p.step;
    bool first = true;
    const double eps = 1e-9 * p.step;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        const double x = p.axis(k);
        if (x < lo - eps || x > hi + eps)
            continue;
        if (first) {
            out.origin = x;
            first = false;
        }
        out.values.push_back(p.values[k]);
    }
    return out;
}

FringeFit fit_visibility(const Profile& profile, double delta_omega)
{
    if (!(delta_omega > 0.0))
        throw std::invalid_argument("fit_visibility: delta_omega must be positive");
    const std::size_t n = profile.values.size();
    const double period = 2.0 * std::numbers::pi / delta_omega;
    if (static_cast<double>(n) * profile.step < 2.0 * period - 1e-9 * period)
        throw DataError("fit_visibility: profile spans less than two fringe periods");

    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double ph = delta_omega * profile.axis(k);
        a(k, 0) = 1.0;
        a(k, 1) = std::cos(ph);
        a(k, 2) = std::sin(ph);
        y(k) = profile.values[k];
    }
    const Eigen::Matrix3d ata = a.transpose() * a;
    const Eigen::Vector3d coef = ata.ldlt().solve(a.transpose() * y);
    const Eigen::VectorXd resid = y - a * coef;
    const double dof = std::max<double>(1.0, static_cast<double>(n) - 3.0);
    const double s2 = resid.squaredNorm() / dof;
    const Eigen::Matrix3d cov = s2 * ata.inverse();

    const double mean = coef(0), c = coef(1), s = coef(2);
    const double amp = std::hypot(c, s);

    FringeFit fit;
    fit.mean = mean;
    fit.visibility.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
    if (!(mean > 0.0) || amp <= 1e-12 * std::abs(mean)) {
        // Flat or non-positive data: no fringe to speak of.
        fit.visibility.value = 0.0;
        fit.visibility.std_error = 1.0;
        fit.theta = 0.0;
        fit.theta_std_error = std::numbers::pi;
        return fit;
    }
    // b cos(x + theta) = b cos(theta) cos x - b sin(theta) sin x
    fit.theta = std::atan2(-s, c);
    const double v = amp / mean;
    // Gradients of V = sqrt(c^2+s^2)/a and theta = atan2(-s, c).
    const Eigen::Vector3d gv(-v / mean, c / (amp * mean), s / (amp * mean));
    const Eigen::Vector3d gt(0.0, s / (amp * amp), -c / (amp * amp));
    fit.visibility.value = std::clamp(v, 0.0, 1.0);
    fit.visibility.std_error = std::sqrt(std::max(0.0, gv.dot(cov * gv)));
    fit.theta_std_error = std::sqrt(std::max(0.0, gt.dot(cov * gt)));
    return fit;
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_var = 0.0;
    double rms = 0.0;
    std::size_t used = 0;
};

// Weighted least squares of y = intercept + slope * x.
LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<double>& w)
{
    LineFit f;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sw += w[k];
        sx += w[k] * x[k];
        sy += w[k] * y[k];
        sxx += w[k] * x[k] * x[k];
        sxy += w[k] * x[k] * y[k];
    }
    const double det = sw * sxx - sx * sx;
    f.used = x.size();
    if (x.size() < 3 || !(det > 0.0))
        throw DataError("fit_ringdown: not enough usable bins in the fit window");
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / sw;
    double chi2 = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - f.intercept - f.slope * x[k];
        chi2 += w[k] * r * r;
        ss += r * r;
    }
    const double red = chi2 / std::max<double>(1.0, static_cast<double>(x.size()) - 2.0);
    f.slope_var = red * sw / det;
    f.rms = std::sqrt(ss / static_cast<double>(x.size()));
    return f;
}

} // namespace

ProfileFit fit_ringdown(const Profile& profile, const RingdownOptions& options)
{
    const auto& v = profile.values;
    if (v.empty())
        throw DataError("fit_ringdown: empty profile");
    const double peak = *std::max_element(v.begin(), v.end());
    if (!(peak > 0.0))
        throw DataError("fit_ringdown: profile has no counts");

    auto collect = [&](double floor, double lo, double hi, double min_count) {
        std::vector<double> xs, ys, ws;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double t = std::abs(profile.axis(k));
            const double c = v[k] - floor;
            if (t < lo || t > hi || c <= min_count)
                continue;
            xs.push_back(t);
            ys.push_back(std::log(c));
            ws.push_back(c);
        }
        return weighted_line(xs, ys, ws);
    };

    // Coarse start: the bins above 10% of the peak carry the decay with little floor.
    LineFit f = collect(0.0, options.exclude_halfwidth, std::numeric_limits<double>::infinity(),
                        0.1 * peak);
    if (!(f.slope < 0.0))
        throw DataError("fit_ringdown: profile does not decay");

    double floor = 0.0;
    for (int iter = 0; iter < 4; ++iter) {
        const double inv_gamma = -1.0 / f.slope;
        if (options.subtract_floor) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (std::abs(profile.axis(k)) >= options.floor_tail * inv_gamma) {
                    sum += v[k];
                    ++cnt;
                }
            }
            floor = cnt >= 3 ? sum / static_cast<double>(cnt) : 0.0;
        }
        f = collect(floor, options.exclude_halfwidth, options.fit_extent * inv_gamma, 0.0);
        if (!(f.slope < 0.0))
            throw DataError("fit_ringdown: profile does not decay");
    }

    ProfileFit out;
    const double g = -f.slope;
    out.value = 1.0 / g;
    out.std_error = std::sqrt(f.slope_var) / (g * g);
    out.residual_rms = f.rms;
    return out;
}

} // namespace fbent
