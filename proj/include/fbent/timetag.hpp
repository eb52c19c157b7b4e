#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fbent/jti.hpp"
#include "fbent/quantum.hpp"
#include "fbent/rng.hpp"

namespace fbent {

// Channel layout shared by the simulator, the file formats and the analysis.
enum Channel : std::uint8_t {
    kSignalTimeResolved = 0,
    kIdlerTimeResolved = 1,
    kSignalPort0 = 2,
    kSignalPort1 = 3,
    kIdlerPort0 = 4,
    kIdlerPort1 = 5,
};
inline constexpr std::uint8_t kChannelCount = 6;

inline bool is_signal_channel(std::uint8_t ch) { return ch == 0 || ch == 2 || ch == 3; }
inline bool is_idler_channel(std::uint8_t ch) { return ch == 1 || ch == 4 || ch == 5; }
// -1 for a time-resolved channel, else the demux output port (0 or 1).
inline int port_of_channel(std::uint8_t ch) { return ch < 2 ? -1 : (ch - 2) % 2; }

enum class Basis { Equatorial, Z };

struct SettingBases {
    Basis signal = Basis::Equatorial;
    Basis idler = Basis::Equatorial;
};

struct NoiseConfig {
    double jitter_fwhm_signal = 60e-12; // s
    double jitter_fwhm_idler = 60e-12;  // s
    double dark_rate_s = 0.0;           // counts/s
    double dark_rate_i = 0.0;           // counts/s
    double accidental_fraction = 0.0;   // of detected coincident pairs, [0,1)
    double accidental_span = 10e-9;     // accidental pairs: |ts-ti| uniform within span/2
    double pump_leak_fraction = 0.0;    // of all tags, [0,1)
    double phase_diffusion_D = 0.0;     // rad^2/s
    std::uint64_t seed = 1;

    void validate() const; // throws ConfigError
};

struct ChannelModel {
    // Table order: idler output 1, idler output 2, signal output 1, signal output 2.
    std::array<double, 4> eta_T{0.2635, 0.2499, 0.0723, 0.0429};
    double demux_visibility_signal = 0.83;
    double demux_visibility_idler = 0.92;
    // Throughput of the time-resolved (interferometer bypassed) paths.
    double eta_signal_equatorial = 0.85;
    double eta_idler_equatorial = 0.85;

    void validate() const; // throws ConfigError
    double port_efficiency(bool signal_side, int port) const
    {
        return signal_side ? eta_T[2 + port] : eta_T[port];
    }
};

struct TimeTag {
    std::uint8_t channel = 0;
    std::uint64_t timestamp_ps = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

struct TimeTagStream {
    std::vector<TimeTag> records;

    // Throws DataError on decreasing timestamps or unknown channels.
    void validate() const;
};

// Merge of two sorted streams, ties broken by channel. Associative.
TimeTagStream merge(const TimeTagStream& a, const TimeTagStream& b);

// A simulated emission with optional frequency-bin labels (-1: side is time resolved)
// and demux output ports (-1: not routed through an interferometer).
struct SimPair {
    double ts = 0.0;
    double ti = 0.0;
    std::int8_t bin_s = -1;
    std::int8_t bin_i = -1;
    std::int8_t port_s = -1;
    std::int8_t port_i = -1;
};

// State realized by a source with pump phase cfg.theta under the phase = delta_omega * t
// reading of detection times: bell_state(-theta).
TwoQubitState source_state(const SourceConfig& cfg);

// Inverse CDF of the density (1 + cos(omega u + phase)) omega/(2 pi) on [0, 2 pi/omega).
double raised_cosine_quantile(double p, double omega, double phase);

// Pairs distributed as the joint temporal intensity: ts-ti ~ Laplace(1/gamma),
// ts+ti from the raised-cosine fringe plus a uniform whole number of fringe periods.
std::vector<TimePair> sample_pairs(const SourceConfig& cfg, std::uint64_t n, std::uint64_t seed,
                                   std::uint64_t substream = 0);
// Same distribution, generated as independent substreams and concatenated in partition order.
std::vector<TimePair> sample_pairs_partitioned(const SourceConfig& cfg, std::uint64_t n,
                                               std::uint64_t seed, std::uint32_t partitions);

// Pairs for an arbitrary state and measurement setting: `trials` emissions, each kept
// with its time-resolved Born probability. Z sides carry a frequency-bin label. Every
// setting keeps a quarter of the trials on average, so equal trials mean equal exposure.
std::vector<SimPair> sample_setting(const TwoQubitState& state, const SourceConfig& cfg,
                                    SettingBases bases, std::uint64_t trials, Rng& rng);

struct ZRouting {
    std::array<std::array<std::uint64_t, 2>, 2> counts{}; // [signal port][idler port], both sides routed
    std::vector<SimPair> survivors;
};

// Sends each labelled photon to its correct demux port with probability
// (1 + V exp(-D t))/2 and thins by the port efficiency. t is the emission time.
ZRouting route_z_basis(std::span<const SimPair> pairs, const ChannelModel& channels, double phase_D,
                       Rng& rng);

// Detection chain for time-resolved sides (efficiency thinning), Gaussian jitter on
// every photon, flat accidental pairs, Poisson dark counts; sorted, quantized to 1 ps.
TimeTagStream apply_detection(std::span<const SimPair> pairs, SettingBases bases,
                              const NoiseConfig& noise, const ChannelModel& channels,
                              const SourceConfig& cfg, Rng& rng);
TimeTagStream apply_detection(std::span<const TimePair> pairs, const NoiseConfig& noise,
                              const ChannelModel& channels, const SourceConfig& cfg, Rng& rng);

// Uncorrelated pump-leak tags with density cos^2(delta_omega t) on both time-resolved
// channels, making up leak_fraction of the returned stream.
TimeTagStream add_pump_leak(const TimeTagStream& stream, const SourceConfig& cfg,
                            double leak_fraction, Rng& rng);

} // namespace fbent
