#include "fbent/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fbent/error.hpp"

namespace fbent {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493; // 1/(2 sqrt(2 ln 2))

bool tag_less(const TimeTag& a, const TimeTag& b)
{
    return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps : a.channel < b.channel;
}

void push_tag(std::vector<TimeTag>& out, std::uint8_t channel, double t)
{
    const double ps = std::round(t * 1e12);
    if (ps < 0.0)
        return;
    out.push_back({channel, static_cast<std::uint64_t>(ps)});
}

Eigen::Vector2cd equatorial_ket(double phi)
{
    return Eigen::Vector2cd(1.0, std::polar(1.0, phi)) / std::sqrt(2.0);
}

Eigen::Vector2cd z_ket(int bin)
{
    return bin == 0 ? Eigen::Vector2cd(1.0, 0.0) : Eigen::Vector2cd(0.0, 1.0);
}

} // namespace

void NoiseConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw ConfigError(what);
    };
    require(jitter_fwhm_signal >= 0.0 && jitter_fwhm_idler >= 0.0, "jitter FWHM must be >= 0");
    require(dark_rate_s >= 0.0 && dark_rate_i >= 0.0, "dark rates must be >= 0");
    require(accidental_fraction >= 0.0 && accidental_fraction < 1.0,
            "accidental_fraction must be in [0,1)");
    require(accidental_span > 0.0, "accidental_span must be positive");
    require(pump_leak_fraction >= 0.0 && pump_leak_fraction < 1.0,
            "pump_leak_fraction must be in [0,1)");
    require(phase_diffusion_D >= 0.0, "phase_diffusion_D must be >= 0");
}

void ChannelModel::validate() const
{
    for (double e : eta_T)
        if (!(e > 0.0 && e <= 1.0))
            throw ConfigError("eta_T entries must be in (0,1]");
    if (!(eta_signal_equatorial > 0.0 && eta_signal_equatorial <= 1.0) ||
        !(eta_idler_equatorial > 0.0 && eta_idler_equatorial <= 1.0))
        throw ConfigError("equatorial path efficiencies must be in (0,1]");
    if (!(demux_visibility_signal >= 0.0 && demux_visibility_signal <= 1.0) ||
        !(demux_visibility_idler >= 0.0 && demux_visibility_idler <= 1.0))
        throw ConfigError("demux visibilities must be in [0,1]");
}

void TimeTagStream::validate() const
{
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (records[k].channel >= kChannelCount)
            throw DataError("time-tag stream: unknown channel id");
        if (k > 0 && records[k].timestamp_ps < records[k - 1].timestamp_ps)
            throw DataError("time-tag stream: timestamps decrease");
    }
}

TimeTagStream merge(const TimeTagStream& a, const TimeTagStream& b)
{
    TimeTagStream out;
    out.records.resize(a.records.size() + b.records.size());
    std::merge(a.records.begin(), a.records.end(), b.records.begin(), b.records.end(),
               out.records.begin(), tag_less);
    return out;
}

TwoQubitState source_state(const SourceConfig& cfg)
{
    return bell_state(-cfg.theta);
}

double raised_cosine_quantile(double p, double omega, double phase)
{
    if (!(omega > 0.0))
        throw std::invalid_argument("raised_cosine_quantile: omega must be positive");
    p = std::clamp(p, 0.0, 1.0);
    const double target = kTwoPi * p;
    const double s0 = std::sin(phase);
    auto g = [&](double x) { return x + std::sin(x + phase) - s0 - target; };
    // g is non-decreasing on [0, 2pi]; Newton safeguarded by bisection.
    double lo = 0.0, hi = kTwoPi, x = target;
    for (int it = 0; it < 100; ++it) {
        const double gx = g(x);
        if (std::abs(gx) < 1e-14)
            break;
        if (gx > 0.0)
            hi = x;
        else
            lo = x;
        const double d = 1.0 + std::cos(x + phase);
        double next = d > 1e-12 ? x - gx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-15)
            break;
        x = next;
    }
    return x / omega;
}

std::vector<TimePair> sample_pairs(const SourceConfig& cfg, std::uint64_t n, std::uint64_t seed,
                                   std::uint64_t substream)
{
    cfg.validate();
    Rng rng(seed, substream);
    const double period = cfg.fringe_period();
    const auto periods = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::floor(2.0 * cfg.window / period)));
    std::vector<TimePair> out;
    out.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        const double minus = rng.laplace(1.0 / cfg.gamma);
        const double u = raised_cosine_quantile(rng.uniform(), cfg.delta_omega, cfg.theta);
        const double plus = u + static_cast<double>(rng.below(periods)) * period;
        out.push_back({0.5 * (plus + minus) + cfg.clock_offset, 0.5 * (plus - minus) + cfg.clock_offset});
    }
    return out;
}

std::vector<TimePair> sample_pairs_partitioned(const SourceConfig& cfg, std::uint64_t n,
                                               std::uint64_t seed, std::uint32_t partitions)
{
    if (partitions == 0)
        throw std::invalid_argument("sample_pairs_partitioned: need at least one partition");
    std::vector<TimePair> out;
    out.reserve(n);
    for (std::uint32_t p = 0; p < partitions; ++p) {
        const std::uint64_t share = n / partitions + (p < n % partitions ? 1 : 0);
        auto part = sample_pairs(cfg, share, seed, p + 1);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<SimPair> sample_setting(const TwoQubitState& state, const SourceConfig& cfg,
                                    SettingBases bases, std::uint64_t trials, Rng& rng)
{
    cfg.validate();
    const Matrix4& rho = state.matrix();
    std::vector<SimPair> out;
    out.reserve(trials / 3);
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        const double minus = rng.laplace(1.0 / cfg.gamma);
        const double plus = rng.uniform(0.0, 2.0 * cfg.window);
        const double ts = 0.5 * (plus + minus), ti = 0.5 * (plus - minus);
        SimPair pair{ts + cfg.clock_offset, ti + cfg.clock_offset};
        Eigen::Vector2cd ks, ki;
        if (bases.signal == Basis::Z) {
            pair.bin_s = static_cast<std::int8_t>(rng.below(2));
            ks = z_ket(pair.bin_s);
        } else {
            ks = equatorial_ket(cfg.delta_omega * ts);
        }
        if (bases.idler == Basis::Z) {
            pair.bin_i = static_cast<std::int8_t>(rng.below(2));
            ki = z_ket(pair.bin_i);
        } else {
            ki = equatorial_ket(cfg.delta_omega * ti);
        }
        Ket4 v;
        v << ks(0) * ki(0), ks(0) * ki(1), ks(1) * ki(0), ks(1) * ki(1);
        const double p = (v.adjoint() * rho * v)(0, 0).real();
        if (rng.uniform() < p)
            out.push_back(pair);
    }
    return out;
}

ZRouting route_z_basis(std::span<const SimPair> pairs, const ChannelModel& channels, double phase_D,
                       Rng& rng)
{
    channels.validate();
    if (phase_D < 0.0)
        throw std::invalid_argument("route_z_basis: phase diffusion must be >= 0");
    ZRouting out;
    out.survivors.reserve(pairs.size());
    for (const SimPair& in : pairs) {
        SimPair p = in;
        const double t = 0.5 * (p.ts + p.ti);
        const double decay = std::exp(-phase_D * t);
        bool alive = true;
        auto route = [&](std::int8_t bin, std::int8_t& port, bool signal_side) {
            if (bin < 0)
                return;
            const double v = signal_side ? channels.demux_visibility_signal
                                         : channels.demux_visibility_idler;
            const bool correct = rng.bernoulli(0.5 * (1.0 + v * decay));
            port = static_cast<std::int8_t>(correct ? bin : 1 - bin);
            if (!rng.bernoulli(channels.port_efficiency(signal_side, port)))
                alive = false;
        };
        route(p.bin_s, p.port_s, true);
        route(p.bin_i, p.port_i, false);
        // Pairs that lose a routed photon cannot form a coincidence and are dropped.
        if (!alive)
            continue;
        if (p.port_s >= 0 && p.port_i >= 0)
            ++out.counts[p.port_s][p.port_i];
        out.survivors.push_back(p);
    }
    return out;
}

TimeTagStream apply_detection(std::span<const SimPair> pairs, SettingBases bases,
                              const NoiseConfig& noise, const ChannelModel& channels,
                              const SourceConfig& cfg, Rng& rng)
{
    noise.validate();
    channels.validate();
    const double sig_s = noise.jitter_fwhm_signal * kFwhmToSigma;
    const double sig_i = noise.jitter_fwhm_idler * kFwhmToSigma;

    TimeTagStream stream;
    auto& recs = stream.records;
    recs.reserve(2 * pairs.size());
    std::uint64_t coincident = 0;

    for (const SimPair& p : pairs) {
        bool s_alive = true, i_alive = true;
        std::uint8_t s_ch = kSignalTimeResolved, i_ch = kIdlerTimeResolved;
        if (bases.signal == Basis::Z) {
            if (p.port_s < 0)
                throw std::invalid_argument("apply_detection: Z-basis signal photon was not routed");
            s_ch = static_cast<std::uint8_t>(kSignalPort0 + p.port_s);
        } else {
            s_alive = rng.bernoulli(channels.eta_signal_equatorial);
        }
        if (bases.idler == Basis::Z) {
            if (p.port_i < 0)
                throw std::invalid_argument("apply_detection: Z-basis idler photon was not routed");
            i_ch = static_cast<std::uint8_t>(kIdlerPort0 + p.port_i);
        } else {
            i_alive = rng.bernoulli(channels.eta_idler_equatorial);
        }
        if (s_alive)
            push_tag(recs, s_ch, p.ts + sig_s * rng.normal());
        if (i_alive)
            push_tag(recs, i_ch, p.ti + sig_i * rng.normal());
        if (s_alive && i_alive)
            ++coincident;
    }

    auto pick_channel = [&](bool signal_side) -> std::uint8_t {
        const Basis b = signal_side ? bases.signal : bases.idler;
        if (b == Basis::Equatorial)
            return signal_side ? kSignalTimeResolved : kIdlerTimeResolved;
        const auto port = static_cast<std::uint8_t>(rng.below(2));
        return static_cast<std::uint8_t>((signal_side ? kSignalPort0 : kIdlerPort0) + port);
    };

    if (noise.accidental_fraction > 0.0) {
        const double f = noise.accidental_fraction;
        const auto n_acc = static_cast<std::uint64_t>(std::llround(f / (1.0 - f) * static_cast<double>(coincident)));
        for (std::uint64_t k = 0; k < n_acc; ++k) {
            const double t0 = rng.uniform(0.0, cfg.window) + cfg.clock_offset;
            const double dt = rng.uniform(-0.5, 0.5) * noise.accidental_span;
            push_tag(recs, pick_channel(true), t0);
            push_tag(recs, pick_channel(false), t0 + dt);
        }
    }

    auto add_dark = [&](std::uint8_t ch, double rate) {
        const std::uint64_t n = rng.poisson(rate * cfg.window);
        for (std::uint64_t k = 0; k < n; ++k)
            push_tag(recs, ch, rng.uniform(0.0, cfg.window) + cfg.clock_offset);
    };
    if (bases.signal == Basis::Equatorial) {
        add_dark(kSignalTimeResolved, noise.dark_rate_s);
    } else {
        add_dark(kSignalPort0, noise.dark_rate_s);
        add_dark(kSignalPort1, noise.dark_rate_s);
    }
    if (bases.idler == Basis::Equatorial) {
        add_dark(kIdlerTimeResolved, noise.dark_rate_i);
    } else {
        add_dark(kIdlerPort0, noise.dark_rate_i);
        add_dark(kIdlerPort1, noise.dark_rate_i);
    }

    std::sort(recs.begin(), recs.end(), tag_less);
    return stream;
}

TimeTagStream apply_detection(std::span<const TimePair> pairs, const NoiseConfig& noise,
                              const ChannelModel& channels, const SourceConfig& cfg, Rng& rng)
{
    std::vector<SimPair> sim;
    sim.reserve(pairs.size());
    for (const auto& p : pairs)
        sim.push_back({p.ts, p.ti});
    return apply_detection(sim, SettingBases{}, noise, channels, cfg, rng);
}

TimeTagStream add_pump_leak(const TimeTagStream& stream, const SourceConfig& cfg,
                            double leak_fraction, Rng& rng)
{
    if (!(leak_fraction >= 0.0 && leak_fraction < 1.0))
        throw std::invalid_argument("add_pump_leak: leak_fraction must be in [0,1)");
    if (leak_fraction == 0.0)
        return stream;
    cfg.validate();
    const double beat = cfg.beat_period();
    const auto periods = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::floor(cfg.window / beat)));
    const auto n_add = static_cast<std::uint64_t>(std::llround(
        leak_fraction / (1.0 - leak_fraction) * static_cast<double>(stream.records.size())));
    TimeTagStream leak;
    leak.records.reserve(n_add);
    for (std::uint64_t k = 0; k < n_add; ++k) {
        // cos^2(w t) = (1 + cos(2 w t))/2 has period T_b.
        const double u = raised_cosine_quantile(rng.uniform(), 2.0 * cfg.delta_omega, 0.0);
        const double t = static_cast<double>(rng.below(periods)) * beat + u + cfg.clock_offset;
        push_tag(leak.records, (k % 2 == 0) ? kSignalTimeResolved : kIdlerTimeResolved, t);
    }
    std::sort(leak.records.begin(), leak.records.end(), tag_less);
    return merge(stream, leak);
}

} // namespace fbent
