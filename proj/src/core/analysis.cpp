#include "fbent/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "fbent/error.hpp"
#include "fbent/rng.hpp"

namespace fbent {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double x)
{
    return x - kTwoPi * std::round(x / kTwoPi);
}

// Phase of a detection time, reduced modulo the optical period first to keep precision
// for timestamps far from the origin.
double phase_of(double t, double delta_omega)
{
    const double period = kTwoPi / delta_omega;
    return delta_omega * (t - period * std::floor(t / period));
}

// 0 for the +1 slot, 1 for the -1 slot, -1 otherwise.
int side_outcome(double phase, double target, double half_width)
{
    const double d = wrap_phase(phase - target);
    if (std::abs(d) <= half_width)
        return 0;
    if (std::abs(d) >= kPi - half_width)
        return 1;
    return -1;
}

// Density of u = x - y for x, y uniform on intervals of width w: triangle on [-w, w].
double triangle(double u, double w)
{
    const double a = std::abs(u);
    return a >= w ? 0.0 : (w - a) / (w * w);
}

double sinc(double x)
{
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
}

} // namespace

void PhaseSlotRule::validate(double delta_omega) const
{
    if (!(delta_omega > 0.0))
        throw ConfigError("phase slots: delta_omega must be positive");
    const double tb = kPi / delta_omega;
    if (!(slot_width > 0.0 && slot_width < tb / 4.0))
        throw ConfigError("phase slots: slot width must be in (0, T_b/4)");
    if (!(band > 0.0))
        throw ConfigError("phase slots: band must be positive");
    if (!std::isfinite(phi_a) || !std::isfinite(phi_b))
        throw ConfigError("phase slots: target phases must be finite");
}

double default_slot_width(double delta_omega)
{
    return kPi / delta_omega / 20.0;
}

int outcome_cell(const TimePair& pair, const PhaseSlotRule& rule, double delta_omega)
{
    if (std::abs(pair.ts - pair.ti) > rule.band)
        return -1;
    const double hw = 0.5 * delta_omega * rule.slot_width;
    const int a = side_outcome(phase_of(pair.ts, delta_omega), rule.phi_a, hw);
    if (a < 0)
        return -1;
    const int b = side_outcome(phase_of(pair.ti, delta_omega), rule.phi_b, hw);
    if (b < 0)
        return -1;
    return 2 * a + b;
}

CellGeometry cell_geometry(const PhaseSlotRule& rule, double delta_omega, double gamma)
{
    rule.validate(delta_omega);
    const double period = kTwoPi / delta_omega;
    const double w = rule.slot_width;
    const int reach = static_cast<int>(std::ceil((rule.band + w) / period)) + 1;
    constexpr int kSteps = 256;
    CellGeometry g;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double cs = (rule.phi_a + a * kPi) / delta_omega;
            const double ci = (rule.phi_b + b * kPi) / delta_omega;
            const double c0 = wrap_phase(delta_omega * (cs - ci)) / delta_omega;
            double eff = 0.0, frac = 0.0;
            for (int k = -reach; k <= reach; ++k) {
                const double c = c0 + k * period;
                if (std::abs(c) >= rule.band + w)
                    continue;
                // Midpoint rule over the triangular spread of ts-ti inside the slot square.
                const double h = 2.0 * w / kSteps;
                for (int m = 0; m < kSteps; ++m) {
                    const double u = -w + (m + 0.5) * h;
                    const double tau = c + u;
                    if (std::abs(tau) > rule.band)
                        continue;
                    const double weight = triangle(u, w) * h;
                    frac += weight;
                    eff += weight * std::exp(-gamma * std::abs(tau));
                }
            }
            g.efficiency[a][b] = eff;
            g.area[a][b] = w * w * frac / period;
        }
    return g;
}

CorrelatorEstimate correlator_from_cells(const CellCounts& counts, const CellGeometry& geometry,
                                         double background_density)
{
    CorrelatorEstimate est;
    est.counts = counts;
    std::array<std::array<double, 2>, 2> p{};
    double total = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            est.n_used += counts[a][b];
            const double eff = geometry.efficiency[a][b];
            const double net = std::max(static_cast<double>(counts[a][b]) -
                                            background_density * geometry.area[a][b], 0.0);
            p[a][b] = eff > 0.0 ? net / eff : 0.0;
            total += p[a][b];
        }
    if (est.n_used == 0 || !(total > 0.0)) {
        for (auto& row : est.probabilities)
            row = {0.25, 0.25};
        return est;
    }
    est.defined = true;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            est.probabilities[a][b] = p[a][b] / total;
    const auto& q = est.probabilities;
    est.value = std::clamp(q[0][0] + q[1][1] - q[0][1] - q[1][0], -1.0, 1.0);
    est.std_error = std::sqrt(std::max(1.0 - est.value * est.value, 0.0) / static_cast<double>(est.n_used));
    return est;
}

CorrelatorEstimate correlator_from_counts(const std::array<std::array<double, 2>, 2>& counts,
                                          const std::array<std::array<double, 2>, 2>& efficiency)
{
    CorrelatorEstimate est;
    std::array<std::array<double, 2>, 2> p{};
    double total = 0.0, raw = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            if (counts[a][b] < 0.0 || !(efficiency[a][b] > 0.0))
                throw std::invalid_argument("correlator_from_counts: need counts >= 0 and efficiencies > 0");
            est.counts[a][b] = static_cast<std::uint64_t>(std::llround(counts[a][b]));
            raw += counts[a][b];
            p[a][b] = counts[a][b] / efficiency[a][b];
            total += p[a][b];
        }
    est.n_used = static_cast<std::uint64_t>(std::llround(raw));
    if (!(total > 0.0)) {
        for (auto& row : est.probabilities)
            row = {0.25, 0.25};
        return est;
    }
    est.defined = true;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            est.probabilities[a][b] = p[a][b] / total;
    const auto& q = est.probabilities;
    est.value = std::clamp(q[0][0] + q[1][1] - q[0][1] - q[1][0], -1.0, 1.0);
    est.std_error = std::sqrt(std::max(1.0 - est.value * est.value, 0.0) / raw);
    return est;
}

CorrelatorEstimate equatorial_correlator(std::span<const TimePair> pairs, const PhaseSlotRule& rule,
                                         double delta_omega, const CorrelatorOptions& options)
{
    if (pairs.empty())
        throw DataError("equatorial_correlator: no coincidences");
    const CellGeometry geometry = cell_geometry(rule, delta_omega, options.gamma);
    CellCounts counts{};
    for (const auto& p : pairs) {
        const int cell = outcome_cell(p, rule, delta_omega);
        if (cell >= 0)
            ++counts[cell / 2][cell % 2];
    }
    return correlator_from_cells(counts, geometry, options.background_density);
}

double estimate_background_density(std::span<const TimePair> pairs, double inner, double outer)
{
    if (!(outer > inner) || inner < 0.0)
        throw DataError("background: sideband has zero width");
    std::uint64_t n = 0;
    for (const auto& p : pairs) {
        const double d = std::abs(p.ts - p.ti);
        if (d > inner && d <= outer)
            ++n;
    }
    if (n == 0)
        throw DataError("background: no coincidences in the sideband");
    return static_cast<double>(n) / (2.0 * (outer - inner));
}

ChshScan chsh_scan(std::span<const TimePair> pairs, double delta_omega, const ChshOptions& options)
{
    if (pairs.empty())
        throw DataError("chsh_scan: no coincidences");
    if (!(delta_omega > 0.0))
        throw ConfigError("chsh_scan: delta_omega must be positive");
    const double tb = kPi / delta_omega;
    const double w = options.slot_width > 0.0 ? options.slot_width : default_slot_width(delta_omega);
    const auto n_scan = static_cast<std::size_t>(std::max(3.0, std::round(tb / w)));
    const double hw = 0.5 * delta_omega * w;

    ChshScan scan;
    if (options.subtract_background) {
        double inner = options.sideband_inner;
        if (inner <= 0.0) {
            if (!(options.gamma > 0.0))
                throw ConfigError("chsh_scan: background subtraction needs gamma or sideband_inner");
            inner = 5.0 / options.gamma;
        }
        scan.background_density = estimate_background_density(pairs, inner, options.sideband_outer);
    }

    // counts[k][setting][cell]
    std::vector<std::array<std::array<std::uint64_t, 4>, 4>> counts(n_scan);
    std::vector<int> sig(2 * n_scan), idl(2 * n_scan);
    for (const auto& p : pairs) {
        if (std::abs(p.ts - p.ti) > options.band)
            continue;
        const double ps = phase_of(p.ts, delta_omega);
        const double pi = phase_of(p.ti, delta_omega);
        for (std::size_t k = 0; k < n_scan; ++k) {
            const double ref = delta_omega * tb * static_cast<double>(k) / static_cast<double>(n_scan);
            for (int x = 0; x < 2; ++x) {
                sig[2 * k + x] = side_outcome(ps, ref + kChshSignalOffsets[x], hw);
                idl[2 * k + x] = side_outcome(pi, ref + kChshIdlerOffsets[x], hw);
            }
        }
        for (std::size_t k = 0; k < n_scan; ++k)
            for (int i = 0; i < 2; ++i) {
                const int a = sig[2 * k + i];
                if (a < 0)
                    continue;
                for (int j = 0; j < 2; ++j) {
                    const int b = idl[2 * k + j];
                    if (b >= 0)
                        ++counts[k][2 * i + j][2 * a + b];
                }
            }
    }

    const double bias = options.slot_bias_correction ? std::pow(sinc(hw), 2) : 1.0;
    scan.points.resize(n_scan);
    for (std::size_t k = 0; k < n_scan; ++k) {
        ChshPoint& pt = scan.points[k];
        pt.t = tb * static_cast<double>(k) / static_cast<double>(n_scan);
        const double ref = delta_omega * pt.t;
        double var = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                PhaseSlotRule rule{w, ref + kChshSignalOffsets[i], ref + kChshIdlerOffsets[j], options.band};
                const CellGeometry g = cell_geometry(rule, delta_omega, options.gamma);
                CellCounts cells{};
                for (int c = 0; c < 4; ++c)
                    cells[c / 2][c % 2] = counts[k][2 * i + j][c];
                CorrelatorEstimate e = correlator_from_cells(cells, g, scan.background_density);
                e.value /= bias;
                e.std_error /= bias;
                pt.correlators[2 * i + j] = e;
                pt.s += (i == 1 && j == 1 ? -1.0 : 1.0) * e.value;
                var += e.std_error * e.std_error;
            }
        pt.s_std_error = std::sqrt(var);
        if (std::abs(pt.s) > std::abs(scan.max_s_raw)) {
            scan.max_s_raw = pt.s;
            scan.t_max_raw = pt.t;
        }
    }
    scan.max_s_raw = std::abs(scan.max_s_raw);

    // Weighted fit of each correlator to c cos(2 dw t) + s sin(2 dw t).
    Eigen::Vector2d total = Eigen::Vector2d::Zero();
    Eigen::Matrix2d total_cov = Eigen::Matrix2d::Zero();
    for (int ij = 0; ij < 4; ++ij) {
        Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
        Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
        for (const auto& pt : scan.points) {
            const auto& e = pt.correlators[ij];
            if (!e.defined)
                continue;
            const double sigma = std::max(e.std_error, 1.0 / std::sqrt(static_cast<double>(e.n_used) + 1.0));
            const double wgt = 1.0 / (sigma * sigma);
            const Eigen::Vector2d x(std::cos(2.0 * delta_omega * pt.t), std::sin(2.0 * delta_omega * pt.t));
            normal += wgt * x * x.transpose();
            rhs += wgt * e.value * x;
        }
        if (std::abs(normal.determinant()) < 1e-300)
            throw DataError("chsh_scan: too few populated slots to fit the correlators");
        const Eigen::Matrix2d cov = normal.inverse();
        const double sign = ij == 3 ? -1.0 : 1.0;
        total += sign * (cov * rhs);
        total_cov += cov;
    }
    scan.max_s_fit = total.norm();
    if (scan.max_s_fit > 0.0) {
        const Eigen::Vector2d grad = total / scan.max_s_fit;
        scan.max_s_fit_std_error = std::sqrt(std::max(grad.dot(total_cov * grad), 0.0));
    }
    double t = std::atan2(total(1), total(0)) / (2.0 * delta_omega);
    if (t < 0.0)
        t += tb;
    scan.t_max_fit = t;
    return scan;
}

SteeringResult steering(double xx, double yy, double zz)
{
    SteeringResult r;
    r.two_basis_lhs = 0.5 * (std::abs(xx) + std::abs(zz));
    r.three_basis_lhs = (std::abs(xx) + std::abs(yy) + std::abs(zz)) / 3.0;
    r.two_basis_bound = std::sqrt(2.0) / 2.0;
    r.three_basis_bound = std::sqrt(3.0) / 3.0;
    r.two_basis_violated = r.two_basis_lhs > r.two_basis_bound;
    r.three_basis_violated = r.three_basis_lhs > r.three_basis_bound;
    return r;
}

double binary_entropy(double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("binary_entropy: p must be in [0, 1]");
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    return term(p) + term(1.0 - p);
}

double conditional_entropy(const JointProbabilities& p)
{
    double sum = 0.0;
    for (const auto& row : p)
        for (double v : row) {
            if (!(v >= 0.0))
                throw std::invalid_argument("conditional_entropy: probabilities must be >= 0");
            sum += v;
        }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("conditional_entropy: probabilities must sum to 1");
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    double joint = 0.0, idler = 0.0;
    for (int b = 0; b < 2; ++b) {
        idler += term(p[0][b] + p[1][b]);
        for (int a = 0; a < 2; ++a)
            joint += term(p[a][b]);
    }
    return std::max(joint - idler, 0.0);
}

EntropicCertificate entropic_certificate(double h_xx, double h_yy, double h_zz)
{
    EntropicCertificate c;
    c.two_term_sum = h_xx + h_zz;
    c.three_term_sum = h_xx + h_yy + h_zz;
    c.two_term_violated = c.two_term_sum < 1.0;
    c.three_term_violated = c.three_term_sum < 2.0;
    return c;
}

QkdReport qkd_report(double xx, double yx, double zz, double q, double f, double r)
{
    if (!(q > 0.0 && q <= 1.0))
        throw std::invalid_argument("qkd_report: q must be in (0, 1]");
    if (!(f >= 1.0))
        throw std::invalid_argument("qkd_report: f must be >= 1");
    if (!(r > 0.0))
        throw std::invalid_argument("qkd_report: R must be positive");
    if (!(std::abs(xx) <= 1.0 && std::abs(yx) <= 1.0 && std::abs(zz) <= 1.0))
        throw std::invalid_argument("qkd_report: correlators must lie in [-1, 1]");
    QkdReport rep;
    rep.q = q;
    rep.f = f;
    rep.r = r;
    rep.c = std::clamp(std::sqrt(xx * xx + yx * yx), 0.0, 1.0);
    rep.qber_zz = std::clamp((1.0 - zz) / 2.0, 0.0, 0.5);
    rep.qber_eq = (1.0 - rep.c) / 2.0;
    rep.key_rate_per_coincidence =
        std::max(q * (1.0 - f * binary_entropy(rep.qber_zz) - binary_entropy(rep.qber_eq)), 0.0);
    rep.key_rate = r * rep.key_rate_per_coincidence;
    return rep;
}

BackgroundSubtracted subtract_background(const JtiHistogram& h, const BackgroundOptions& options)
{
    if (!(options.inner > 0.0))
        throw std::invalid_argument("subtract_background: inner must be positive");
    BackgroundSubtracted out;
    out.density.bin_width = h.bin_width;
    out.density.t0_s = h.t0_s;
    out.density.t0_i = h.t0_i;
    out.density.n_s = h.n_s;
    out.density.n_i = h.n_i;
    out.density.counts.assign(h.counts.begin(), h.counts.end());

    auto in_range = [&](double plus) { return plus >= options.tau_lo && plus < options.tau_hi; };
    double sum = 0.0;
    for (std::size_t is = 0; is < h.n_s; ++is)
        for (std::size_t ii = 0; ii < h.n_i; ++ii) {
            const double s = h.center_s(is), i = h.center_i(ii);
            if (std::abs(s - i) > options.inner && in_range(s + i)) {
                sum += h.at(is, ii);
                ++out.sideband_bins;
            }
        }
    if (out.sideband_bins == 0)
        throw DataError("subtract_background: no sideband bins beyond the inner cut");
    out.floor_per_bin = sum / static_cast<double>(out.sideband_bins);

    for (std::size_t is = 0; is < h.n_s; ++is)
        for (std::size_t ii = 0; ii < h.n_i; ++ii) {
            if (!in_range(h.center_s(is) + h.center_i(ii)))
                continue;
            double& v = out.density.at(is, ii);
            v -= out.floor_per_bin;
            if (v < 0.0) {
                out.clamp_mass += -v;
                v = 0.0;
            }
        }
    return out;
}

CertificationReport certify(const CertificationInputs& in)
{
    CertificationReport rep;
    const double dw = in.delta_omega;
    rep.chsh = chsh_scan(in.equatorial, dw, in.chsh);
    const double w = in.chsh.slot_width > 0.0 ? in.chsh.slot_width : default_slot_width(dw);
    const double ref = dw * rep.chsh.t_max_fit;
    const PhaseSlotRule rx{w, ref, ref, in.chsh.band};
    const PhaseSlotRule ry{w, ref + kPi / 2.0, ref + kPi / 2.0, in.chsh.band};
    const CellGeometry gx = cell_geometry(rx, dw, in.chsh.gamma);
    const CellGeometry gy = cell_geometry(ry, dw, in.chsh.gamma);

    // Records reduced to (xx cell, yy cell, sideband) categories; a Poisson bootstrap over
    // records is then a Poisson draw per category.
    const bool subtract = in.chsh.subtract_background;
    double inner = in.chsh.sideband_inner;
    if (subtract && inner <= 0.0)
        inner = 5.0 / in.chsh.gamma;
    const double sideband_width = subtract ? 2.0 * (in.chsh.sideband_outer - inner) : 1.0;
    std::array<double, 50> category{};
    for (const auto& p : in.equatorial) {
        const int x = outcome_cell(p, rx, dw);
        const int y = outcome_cell(p, ry, dw);
        const double d = std::abs(p.ts - p.ti);
        const int sb = subtract && d > inner && d <= in.chsh.sideband_outer ? 1 : 0;
        category[((x < 0 ? 4 : x) * 5 + (y < 0 ? 4 : y)) * 2 + sb] += 1.0;
    }

    struct Stats {
        CorrelatorEstimate xx, yy, zz;
    };
    auto evaluate = [&](const std::array<double, 50>& cat, const std::array<std::array<double, 2>, 2>& zz) {
        CellCounts cx{}, cy{};
        double sb = 0.0;
        for (int k = 0; k < 50; ++k) {
            const int s = k % 2, y = (k / 2) % 5, x = k / 10;
            const auto n = static_cast<std::uint64_t>(cat[k]);
            if (x < 4)
                cx[x / 2][x % 2] += n;
            if (y < 4)
                cy[y / 2][y % 2] += n;
            if (s)
                sb += cat[k];
        }
        const double lambda = subtract ? sb / sideband_width : 0.0;
        Stats st{correlator_from_cells(cx, gx, lambda), correlator_from_cells(cy, gy, lambda),
                 correlator_from_counts(zz, in.zz_efficiency)};
        return st;
    };

    const Stats point = evaluate(category, in.zz_counts);
    rep.xx = point.xx;
    rep.yy = point.yy;
    rep.zz = point.zz;
    if (!rep.xx.defined || !rep.yy.defined || !rep.zz.defined)
        throw DataError("certify: a correlator has no retained events");
    rep.steering = steering(rep.xx.value, rep.yy.value, rep.zz.value);
    rep.h_xx = conditional_entropy(rep.xx.probabilities);
    rep.h_yy = conditional_entropy(rep.yy.probabilities);
    rep.h_zz = conditional_entropy(rep.zz.probabilities);
    rep.entropic = entropic_certificate(rep.h_xx, rep.h_yy, rep.h_zz);

    rep.steering_three.estimate = rep.steering.three_basis_lhs;
    rep.steering_two.estimate = rep.steering.two_basis_lhs;
    rep.entropy_three.estimate = rep.entropic.three_term_sum;
    rep.entropy_two.estimate = rep.entropic.two_term_sum;
    if (in.bootstrap_resamples < 2)
        return rep;

    Rng rng(in.seed, 0xb007);
    std::array<double, 4> sum{}, sum2{};
    std::uint32_t used = 0;
    for (std::uint32_t r = 0; r < in.bootstrap_resamples; ++r) {
        std::array<double, 50> cat{};
        for (int k = 0; k < 50; ++k)
            cat[k] = category[k] > 0.0 ? static_cast<double>(rng.poisson(category[k])) : 0.0;
        std::array<std::array<double, 2>, 2> zz{};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                zz[a][b] = in.zz_counts[a][b] > 0.0 ? static_cast<double>(rng.poisson(in.zz_counts[a][b])) : 0.0;
        const Stats st = evaluate(cat, zz);
        if (!st.xx.defined || !st.yy.defined || !st.zz.defined)
            continue;
        const SteeringResult s = steering(st.xx.value, st.yy.value, st.zz.value);
        const EntropicCertificate e = entropic_certificate(conditional_entropy(st.xx.probabilities),
                                                           conditional_entropy(st.yy.probabilities),
                                                           conditional_entropy(st.zz.probabilities));
        const std::array<double, 4> v{s.three_basis_lhs, s.two_basis_lhs, e.three_term_sum, e.two_term_sum};
        for (int k = 0; k < 4; ++k) {
            sum[k] += v[k];
            sum2[k] += v[k] * v[k];
        }
        ++used;
    }
    if (used >= 2) {
        auto sd = [&](int k) {
            const double m = sum[k] / used;
            return std::sqrt(std::max(sum2[k] / used - m * m, 0.0) * used / (used - 1.0));
        };
        rep.steering_three.std_error = sd(0);
        rep.steering_two.std_error = sd(1);
        rep.entropy_three.std_error = sd(2);
        rep.entropy_two.std_error = sd(3);
    }
    return rep;
}

} // namespace fbent
