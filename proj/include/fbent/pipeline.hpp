#pragma once

#include <cstdint>

#include "fbent/coincidence.hpp"
#include "fbent/config.hpp"
#include "fbent/jti.hpp"
#include "fbent/quantum.hpp"
#include "fbent/timetag.hpp"

namespace fbent {

// Source pairs through the detection chain, with pump leak when configured. Both time
// resolved. Deterministic in cfg.noise.seed.
TimeTagStream simulate_stream(const RunConfig& cfg, std::uint64_t n_pairs);

// One tomography/certification setting: `trials` emissions of `state` (the source state when
// null), Z sides routed through the demultiplexers with phase diffusion, then detection.
// `substream` separates settings sharing a seed.
TimeTagStream simulate_setting_stream(const RunConfig& cfg, SettingBases bases, std::uint64_t trials,
                                      std::uint64_t substream, const TwoQubitState* state = nullptr);

struct JtiOptions {
    double bin_width = kDefaultBinWidth;
    double window = kDefaultCoincidenceWindow; // coincidence half-width
    double band = kDefaultDiagonalBand;
    int fold_beats = 5; // frame length in beat periods
    RingdownOptions ringdown;
};

struct JtiAnalysis {
    std::size_t coincidences = 0;
    JtiHistogram frame;
    Profile diagonal;
    Profile antidiagonal;
    FringeFit fringe;
    ProfileFit ringdown;
};

// Coincidences -> folded frame histogram -> profiles -> fits. The diagonal profile is cropped
// to the fully populated part of the frame, the antidiagonal one to the coincidence window.
// Throws DataError("no coincidences") on an empty set.
JtiAnalysis analyze_jti(std::span<const TimePair> pairs, double delta_omega, const JtiOptions& options = {});

} // namespace fbent
