#include "fbent/pipeline.hpp"

#include "fbent/error.hpp"

namespace fbent {

TimeTagStream simulate_stream(const RunConfig& cfg, std::uint64_t n_pairs)
{
    validate(cfg);
    const auto pairs = sample_pairs(cfg.source, n_pairs, cfg.noise.seed, 0);
    Rng rng(cfg.noise.seed, 1);
    TimeTagStream stream = apply_detection(pairs, cfg.noise, cfg.channels, cfg.source, rng);
    if (cfg.noise.pump_leak_fraction > 0.0)
        stream = add_pump_leak(stream, cfg.source, cfg.noise.pump_leak_fraction, rng);
    return stream;
}

TimeTagStream simulate_setting_stream(const RunConfig& cfg, SettingBases bases, std::uint64_t trials,
                                      std::uint64_t substream, const TwoQubitState* state)
{
    validate(cfg);
    Rng rng(cfg.noise.seed, 100 + substream);
    const TwoQubitState rho = state ? *state : source_state(cfg.source);
    std::vector<SimPair> pairs = sample_setting(rho, cfg.source, bases, trials, rng);
    if (bases.signal == Basis::Z || bases.idler == Basis::Z)
        pairs = route_z_basis(pairs, cfg.channels, cfg.noise.phase_diffusion_D, rng).survivors;
    TimeTagStream stream = apply_detection(pairs, bases, cfg.noise, cfg.channels, cfg.source, rng);
    if (cfg.noise.pump_leak_fraction > 0.0 && bases.signal == Basis::Equatorial &&
        bases.idler == Basis::Equatorial)
        stream = add_pump_leak(stream, cfg.source, cfg.noise.pump_leak_fraction, rng);
    return stream;
}

JtiAnalysis analyze_jti(std::span<const TimePair> pairs, double delta_omega, const JtiOptions& options)
{
    if (pairs.empty())
        throw DataError("no coincidences");
    if (options.fold_beats < 1)
        throw ConfigError("jti: fold_beats must be >= 1");
    JtiAnalysis out;
    out.coincidences = pairs.size();
    const double tb = std::numbers::pi / delta_omega;
    const double fold = options.fold_beats * tb;
    const auto folded = fold_pairs(pairs, fold);
    out.frame = frame_histogram(folded, fold, 2.0 * options.window, options.bin_width);
    // Folded ts+ti covers [0, 2 fold); keep a margin of one band at each end.
    out.diagonal = crop(diagonal_profile(out.frame, options.band), options.band, 2.0 * fold - options.band);
    out.antidiagonal = crop(antidiagonal_profile(out.frame), -options.window, options.window);
    out.fringe = fit_visibility(out.diagonal, delta_omega);
    out.ringdown = fit_ringdown(out.antidiagonal, options.ringdown);
    return out;
}

} // namespace fbent
