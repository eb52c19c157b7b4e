// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fbent/analysis.hpp"
#include "fbent/coincidence.hpp"
#include "fbent/config.hpp"
#include "fbent/error.hpp"
#include "fbent/fwi.hpp"
#include "fbent/jti.hpp"
#include "fbent/pipeline.hpp"
#include "fbent/timetag_io.hpp"
#include "fbent/tomography.hpp"
#include "stats.hpp"

using namespace fbent;
using std::numbers::pi;

namespace {

// Collects the individual checks of one criterion.
class Criterion {
public:
    void check(bool ok, const std::string& what)
    {
        lines_.push_back(std::string(ok ? "    ok   " : "    FAIL ") + what);
        ok_ = ok_ && ok;
    }
    void note(const std::string& what) { lines_.push_back("    note " + what); }
    bool ok() const { return ok_; }
    const std::vector<std::string>& lines() const { return lines_; }

private:
    bool ok_ = true;
    std::vector<std::string> lines_;
};

std::string fmt(const char* f, double a)
{
    char b[128];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

template <class... A>
std::string fmt(const char* f, A... a)
{
    char b[256];
    std::snprintf(b, sizeof b, f, a...);
    return b;
}

bool within(double x, double want, double tol) { return std::abs(x - want) <= tol; }

RunConfig quiet_config()
{
    RunConfig c;
    c.noise.jitter_fwhm_signal = c.noise.jitter_fwhm_idler = 0.0;
    return c;
}

std::vector<TimePair> equatorial_pairs(const TimeTagStream& s)
{
    std::vector<TimePair> out;
    for (const auto& c : find_coincidences(s))
        if (c.ch_s == kSignalTimeResolved && c.ch_i == kIdlerTimeResolved)
            out.push_back({c.ts, c.ti});
    return out;
}

// Settings shared by the noisy criteria: accidentals and jitter put the fitted diagonal
// visibility at the measured 0.919; demux contrast puts ZZ near 0.873.
RunConfig matched_config()
{
    RunConfig c;
    c.noise.accidental_fraction = 0.245;
    c.noise.jitter_fwhm_signal = c.noise.jitter_fwhm_idler = 60e-12;
    c.channels.demux_visibility_signal = c.channels.demux_visibility_idler = 0.966;
    return c;
}

ChshOptions chsh_options(const RunConfig& cfg, bool subtract)
{
    ChshOptions o;
    o.gamma = cfg.source.gamma;
    o.subtract_background = subtract;
    o.slot_bias_correction = true; // finite slots average the fringe by sinc^2
    o.sideband_inner = 5.0 / cfg.source.gamma;
    o.sideband_outer = kDefaultCoincidenceWindow;
    return o;
}

void ideal_chsh(Criterion& c)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = quiet_config();
    cfg.source.delta_omega = 2 * pi * 820e6;
    cfg.source.gamma = 1.0 / 581.4e-12;
    cfg.source.theta = 0.0;
    const auto pairs = equatorial_pairs(simulate_stream(cfg, 1000000));
    const auto jti = analyze_jti(pairs, cfg.source.delta_omega); // folded frame histogram and fits
    const auto scan = chsh_scan(pairs, cfg.source.delta_omega, chsh_options(cfg, false));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.note(fmt("%zu coincidences, frame visibility %.4f, raw grid max S = %.4f", pairs.size(),
               jti.fringe.visibility.value, scan.max_s_raw));
    c.check(within(scan.max_s_fit, 2 * std::sqrt(2.0), 0.02),
            fmt("max S = %.4f +- %.4f vs 2 sqrt2 = %.4f (+-0.02)", scan.max_s_fit, scan.max_s_fit_std_error, 2 * std::sqrt(2.0)));
    c.check(secs < 30.0, fmt("runtime %.2f s < 30 s", secs));
}

void noisy_chsh(Criterion& c)
{
    const RunConfig cfg = matched_config();
    const auto pairs = equatorial_pairs(simulate_stream(cfg, 1000000));
    const auto jti = analyze_jti(pairs, cfg.source.delta_omega);
    const double v = jti.fringe.visibility.value;
    c.check(within(v, 0.919, 0.005), fmt("fitted diagonal visibility %.4f (0.919 +- 0.005)", v));
    const auto scan = chsh_scan(pairs, cfg.source.delta_omega, chsh_options(cfg, false));
    c.check(scan.max_s_fit >= 2.46 && scan.max_s_fit <= 2.60,
            fmt("max S = %.4f +- %.4f in [2.46, 2.60]", scan.max_s_fit, scan.max_s_fit_std_error));
    c.note(fmt("symmetric-noise estimate 2 sqrt2 V = %.4f, raw grid max %.4f", 2 * std::sqrt(2.0) * v, scan.max_s_raw));
}

void ringdown(Criterion& c)
{
    RunConfig cfg;
    cfg.source.gamma = 1.0 / 581.4e-12;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.noise.seed = seed;
        const auto pairs = equatorial_pairs(simulate_stream(cfg, 300000));
        const double r = analyze_jti(pairs, cfg.source.delta_omega).ringdown.value;
        const double rel = r / 581.4e-12 - 1.0;
        worst = std::max(worst, std::abs(rel));
        c.check(std::abs(rel) <= 0.01, fmt("seed %2d: 1/gamma = %.2f ps (%+.2f%%)", static_cast<int>(seed), r * 1e12, rel * 100));
    }
    c.note(fmt("worst deviation %.2f%%", worst * 100));
}

// Z-basis counts, columns |00>, |10>, |01>, |11> in signal-major order.
constexpr double kC00 = 264897, kC10 = 11011, kC01 = 25411, kC11 = 270383;

void zz_counts(Criterion& c)
{
    const std::array<std::array<double, 2>, 2> counts{{{kC00, kC01}, {kC10, kC11}}};
    const auto zz = correlator_from_counts(counts);
    const double n = kC00 + kC01 + kC10 + kC11;
    // by hand: (agree - disagree) / total
    const double oracle = (kC00 + kC11 - kC01 - kC10) / n;
    c.check(within(zz.value, 0.873, 0.001) && within(zz.value, oracle, 1e-12),
            fmt("<ZZ> = %.5f (0.873 +- 0.001; count arithmetic %.5f)", zz.value, oracle));
    const JointProbabilities p{{{kC00 / n, kC01 / n}, {kC10 / n, kC11 / n}}};
    const double h = conditional_entropy(p);
    // H(s|i) = H(s,i) - H(i), directly from the four cells
    double joint = 0.0;
    for (double x : {kC00, kC01, kC10, kC11})
        joint -= x / n * std::log2(x / n);
    const double pi0 = (kC00 + kC10) / n;
    const double oracle_h = joint - binary_entropy(pi0);
    c.check(within(h, 0.335, 0.001) && within(h, oracle_h, 1e-12),
            fmt("H(Z_s|Z_i) = %.4f (0.335 +- 0.001; entropy identity %.4f)", h, oracle_h));
    c.check(within(h, 0.307, 0.03), fmt("published H(Z_s|Z_i) 0.307 vs computed %.4f (+-0.03)", h));
    c.note("both values logged; the printed 0.307 involves preprocessing the counts do not carry");
}

void steering_bounds(Criterion& c)
{
    const auto s = steering(-0.912, 0.839, 0.873);
    c.check(within(s.three_basis_lhs, 0.875, 0.001) && s.three_basis_violated,
            fmt("three-basis LHS %.4f (0.875 +- 0.001) > sqrt3/3 = %.4f", s.three_basis_lhs, std::sqrt(3.0) / 3));
    c.check(within(s.two_basis_lhs, 0.8925, 1e-12) && s.two_basis_violated,
            fmt("two-basis LHS %.4f (0.8925) > sqrt2/2 = %.4f", s.two_basis_lhs, std::sqrt(2.0) / 2));
}

void entropic(Criterion& c)
{
    const RunConfig cfg = matched_config();
    const auto pairs = equatorial_pairs(simulate_stream(cfg, 1000000));
    const auto zz_stream = simulate_setting_stream(cfg, {Basis::Z, Basis::Z}, 2000000, 3);
    CertificationInputs in;
    in.equatorial = pairs;
    in.delta_omega = cfg.source.delta_omega;
    in.chsh = chsh_options(cfg, true);
    const auto pc = port_counts(find_coincidences(zz_stream), in.chsh.band);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            in.zz_counts[a][b] = static_cast<double>(pc[a][b]);
            in.zz_efficiency[a][b] = cfg.channels.port_efficiency(true, a) * cfg.channels.port_efficiency(false, b);
        }
    in.bootstrap_resamples = 500;
    const auto rep = certify(in);
    const double sum = rep.entropy_three.estimate, se = rep.entropy_three.std_error;
    const double margin = (2.0 - sum) / se;
    c.check(sum < 2.0 && margin >= 5.0,
            fmt("three-term sum %.4f +- %.4f, margin %.1f sigma (>= 5)", sum, se, margin));
    c.note(fmt("H_XX %.3f  H_YY %.3f  H_ZZ %.3f  ZZ %.4f", rep.h_xx, rep.h_yy, rep.h_zz, rep.zz.value));

    const auto ideal = bell_state(0.0);
    const double hx = conditional_entropy(joint_probabilities(ideal, pauli(Pauli::X), pauli(Pauli::X)));
    const double hy = conditional_entropy(joint_probabilities(ideal, pauli(Pauli::Y), pauli(Pauli::Y)));
    const double hz = conditional_entropy(joint_probabilities(ideal, pauli(Pauli::Z), pauli(Pauli::Z)));
    c.check(hx + hy + hz == 0.0, fmt("ideal state exact sum = %.3g", hx + hy + hz));
}

std::vector<MeasurementSetting> simulated_settings(const RunConfig& cfg, const TomographyModel& m, std::uint64_t trials)
{
    std::vector<MeasurementSetting> out;
    std::uint64_t sub = 0;
    for (auto b : standard_settings())
        out.push_back(count_setting(find_coincidences(simulate_setting_stream(cfg, b, trials, sub++)), b, m));
    return out;
}

bool monotone(const std::vector<double>& t)
{
    for (std::size_t k = 1; k < t.size(); ++k)
        if (t[k] < t[k - 1])
            return false;
    return true;
}

void tomography(Criterion& c)
{
    MleOptions opt;
    opt.record_trace = true;
    {
        TomographyModel m;
        std::vector<MeasurementSetting> exact;
        for (auto b : standard_settings())
            exact.push_back(expected_setting(bell_state(0.0), b, m, 1e6));
        const auto r = mle_reconstruct(build_projector_set(exact, m), opt);
        c.check(r.fidelity_to_phi_plus >= 0.9999 && r.purity >= 0.9999,
                fmt("(a) noiseless: F = %.6f, purity = %.6f (>= 0.9999)", r.fidelity_to_phi_plus, r.purity));
        c.check(r.converged && r.iterations < 10000 && monotone(r.trace),
                fmt("(a) converged in %d iterations, likelihood monotone", r.iterations));
    }
    {
        const RunConfig cfg = matched_config();
        TomographyModel m;
        m.delta_omega = cfg.source.delta_omega;
        m.gamma = cfg.source.gamma;
        m.channels = cfg.channels;
        const auto settings = simulated_settings(cfg, m, 1000000);
        const auto el = build_projector_set(settings, m);
        const auto r = mle_reconstruct(el, opt);
        const auto u = uncertainty(el, r, 30, 1);
        c.check(within(r.fidelity_to_phi_plus, 0.91, 0.03),
                fmt("(b) matched noise: F = %.4f +- %.4f (0.91 +- 0.03)", r.fidelity_to_phi_plus, u.fidelity_std));
        c.check(within(r.purity, 0.84, 0.04), fmt("(b) purity = %.4f +- %.4f (0.84 +- 0.04)", r.purity, u.purity_std));
        c.check(r.converged && r.iterations < 10000 && monotone(r.trace),
                fmt("(b) converged in %d iterations, likelihood monotone over %zu steps", r.iterations, r.trace.size()));
    }
}

void qkd(Criterion& c)
{
    const auto r = qkd_report(-0.912, 0.0, 0.873);
    c.check(r.qber_zz == (1.0 - 0.873) / 2.0 && within(r.qber_zz, 0.0635, 1e-15), fmt("QBER_ZZ = %.4f%%", r.qber_zz * 100));
    const auto perfect = qkd_report(1.0, 0.0, 1.0, 0.5, 1.1, 1.0);
    c.check(perfect.key_rate_per_coincidence == 0.5, fmt("C = 1, QBER = 0: K/R = %.3f = q", perfect.key_rate_per_coincidence));
    bool nonpositive = true;
    for (double other : {1.0, 0.5, 0.0}) {
        nonpositive = nonpositive && qkd_report(0.0, 0.0, other, 0.5, 1.0, 1.0).key_rate_per_coincidence <= 0.0; // H2(1/2) on the equatorial side
        nonpositive = nonpositive && qkd_report(other, 0.0, 0.0, 0.5, 1.0, 1.0).key_rate_per_coincidence <= 0.0; // H2(1/2) on the key side
    }
    c.check(nonpositive, "any H2 argument 1/2 with f = 1: K/R <= 0");
    // One party picks among three bases and the other among two: both in Z with probability 1/6.
    const double q = 1.0 / 6.0, f = 1.1;
    const auto reported = qkd_report(-0.912, 0.0, 0.873, q, f, 1.0);
    c.check(within(reported.key_rate_per_coincidence, 0.058, 0.01),
            fmt("K/R = %.4f bits/coincidence (0.058 +- 0.01) under q = 1/6, f = %.1f, C = |XX| = %.3f",
                reported.key_rate_per_coincidence, f, reported.c));
    c.note(fmt("parameter dependent: q = 1/2 with the same f and C gives %.4f",
               qkd_report(-0.912, 0.0, 0.873, 0.5, f, 1.0).key_rate_per_coincidence));
}

void fwi(Criterion& c)
{
    const auto d = reference_design();
    const double l = opd(d, 0.0);
    c.check(within(l, 0.1831, 0.0002), fmt("reference geometry opd = %.4f cm (18.31 +- 0.02)", l * 100));
    const double mhz = demux_delay(l).bin_spacing / (2 * pi) / 1e6;
    c.check(within(mhz, 819.7, 1.0), fmt("bin spacing pi c / opd = %.2f MHz (819.7 +- 1)", mhz));
    const double n = 1.5007, target = 0.1831;
    const auto w = solve_widened(n, AirGaps{}, target, true);
    const double g = w.long_arm.back().length;
    const double oracle = target / (2.0 * (n - 1.0 / n));
    c.check(within(g, 0.1097, 0.0001) && within(g, oracle, 1e-15),
            fmt("solved glass length %.4f cm (10.97 +- 0.01; closed form %.4f)", g * 100, oracle * 100));
    c.check(w.widening_coefficient() == 0.0, fmt("widening coefficient %.3g", w.widening_coefficient()));
    SourceConfig src;
    const auto u = unwidened_design(target, 0.1, true);
    bool ordered = true;
    std::ostringstream row;
    for (double a : {0.005, 0.01, 0.02, 0.03, 0.04, 0.05}) {
        const double vw = demux_visibility(w, src.gamma, src.delta_omega, a);
        const double vu = demux_visibility(u, src.gamma, src.delta_omega, a);
        ordered = ordered && vw > vu;
        row << fmt(" %.0f mrad %.3f/%.3f", a * 1e3, vw, vu);
    }
    c.check(ordered, "widened > unwidened visibility at every spread:" + row.str());
}

void properties(Criterion& c)
{
    SourceConfig src;
    {
        const auto pairs = sample_pairs(src, 100000, 11);
        std::vector<double> tau;
        for (const auto& p : pairs)
            tau.push_back(p.ts - p.ti);
        const double d = stats::ks_statistic(tau, [&](double x) { return stats::laplace_cdf(x, 1.0 / src.gamma); });
        const double p = stats::ks_pvalue(d, tau.size());
        c.check(p > 0.01, fmt("sampler KS vs Laplace: D = %.5f, p = %.3f (> 0.01), n = 1e5", d, p));
    }
    {
        RunConfig cfg;
        cfg.noise.accidental_fraction = 0.1;
        cfg.noise.dark_rate_s = 100;
        const auto a = simulate_stream(cfg, 50000), b = simulate_stream(cfg, 50000);
        std::ostringstream sa, sb;
        write_tags_binary(sa, a);
        write_tags_binary(sb, b);
        c.check(sa.str() == sb.str() && !sa.str().empty(), fmt("replay byte-identical (%zu bytes)", sa.str().size()));
    }
    {
        const auto pairs = sample_pairs(src, 30000, 12);
        const std::span<const TimePair> s(pairs);
        auto h = [](std::span<const TimePair> p) { return histogram(p, 20e-12, -1e-6, -1e-6, 2000, 2000); };
        const auto whole = h(s);
        const auto a = h(s.subspan(0, 9000)), b = h(s.subspan(9000, 11000)), cc = h(s.subspan(20000));
        c.check(merge(merge(a, b), cc).counts == whole.counts && merge(a, merge(b, cc)).counts == whole.counts,
                "histogram partition-merge associative");
    }
    {
        std::mt19937_64 g(13);
        std::uniform_int_distribution<std::uint64_t> count(0, 1000);
        std::uniform_real_distribution<double> eff(1e-3, 1.0), bg(0.0, 1e9);
        PhaseSlotRule rule;
        rule.slot_width = default_slot_width(src.delta_omega);
        const auto geom = cell_geometry(rule, src.delta_omega, src.gamma);
        bool bounded = true;
        for (int k = 0; k < 20000; ++k) {
            CellCounts cells;
            std::array<std::array<double, 2>, 2> dc, de;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    cells[a][b] = count(g);
                    dc[a][b] = static_cast<double>(cells[a][b]);
                    de[a][b] = eff(g);
                }
            const double v1 = correlator_from_cells(cells, geom, k % 2 ? bg(g) : 0.0).value;
            const double v2 = correlator_from_counts(dc, de).value;
            bounded = bounded && std::abs(v1) <= 1.0 && std::abs(v2) <= 1.0;
        }
        c.check(bounded, "|correlator| <= 1 over 20000 random count/efficiency/background draws");
    }
    {
        RunConfig cfg = quiet_config();
        cfg.channels.eta_T = {1.0, 1.0, 1.0, 1.0};
        cfg.channels.demux_visibility_signal = cfg.channels.demux_visibility_idler = 1.0;
        cfg.noise.phase_diffusion_D = 0.05;
        const auto co = find_coincidences(simulate_setting_stream(cfg, {Basis::Z, Basis::Z}, 2000000, 1));
        constexpr int kWindows = 10;
        std::array<std::array<double, 2>, kWindows> tally{};
        for (const auto& e : co) {
            if (e.ch_s < 2 || e.ch_i < 4)
                continue;
            const int w = std::clamp(static_cast<int>(e.ts / cfg.source.window * kWindows), 0, kWindows - 1);
            tally[w][(e.ch_s - 2) == (e.ch_i - 4) ? 0 : 1] += 1;
        }
        std::vector<double> t, lz;
        for (int w = 0; w < kWindows; ++w) {
            t.push_back((w + 0.5) * cfg.source.window / kWindows);
            lz.push_back(std::log((tally[w][0] - tally[w][1]) / (tally[w][0] + tally[w][1])));
        }
        const double rate = -stats::ols_slope(t, lz);
        const double want = 2 * cfg.noise.phase_diffusion_D;
        c.check(within(rate, want, 0.1 * want), fmt("ZZ(t) decay rate %.4f /s vs 2D = %.4f (+-10%%)", rate, want));
    }
}

} // namespace

int main()
{
    set_warning_handler([](std::string_view) {});
    const std::vector<std::pair<const char*, std::function<void(Criterion&)>>> criteria = {
        {"ideal-state CHSH", ideal_chsh},
        {"noisy CHSH regression", noisy_chsh},
        {"ringdown recovery", ringdown},
        {"Z-basis count arithmetic", zz_counts},
        {"steering inequalities", steering_bounds},
        {"entropic certificate", entropic},
        {"tomography", tomography},
        {"QKD figures", qkd},
        {"field-widened interferometer", fwi},
        {"property suites", properties},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Criterion c;
        try {
            criteria[k].second(c);
        } catch (const std::exception& e) {
            c.check(false, std::string("threw: ") + e.what());
        }
        std::printf("%s %2zu %s\n", c.ok() ? "PASS" : "FAIL", k + 1, criteria[k].first);
        for (const auto& l : c.lines())
            std::printf("%s\n", l.c_str());
        std::fflush(stdout);
        failed += c.ok() ? 0 : 1;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
