#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace fbent {

inline constexpr double kDefaultDeltaOmega = 2.0 * std::numbers::pi * 820e6; // rad/s
inline constexpr double kDefaultRingdown = 581.4e-12;                         // s
inline constexpr double kDefaultBinWidth = 10e-12;                          // s
inline constexpr double kDefaultDiagonalBand = 800e-12;                     // s

struct SourceConfig {
    double delta_omega = kDefaultDeltaOmega; // bin spacing, rad/s
    double gamma = 1.0 / kDefaultRingdown;   // linewidth, 1/s
    double theta = 0.0;                    // pump phase, rad
    double pair_rate = 1e5;                // pairs/s
    double window = 10.0;                  // acquisition span, s
    double clock_offset = 0.0;             // s, added to every emission time

    // Throws ConfigError on invalid fields; warns when delta_omega/gamma < 10.
    void validate() const;
    double beat_period() const { return std::numbers::pi / delta_omega; }   // T_b
    double fringe_period() const { return 2.0 * beat_period(); }           // along ts+ti
};

struct TimePair {
    double ts = 0.0; // signal detection time, s
    double ti = 0.0; // idler detection time, s
};

// 2D histogram over (ts, ti). Row index is the signal axis.
template <class T>
struct Histogram2D {
    double bin_width = kDefaultBinWidth;
    double t0_s = 0.0;
    double t0_i = 0.0;
    std::size_t n_s = 0;
    std::size_t n_i = 0;
    std::vector<T> counts;

    T& at(std::size_t is, std::size_t ii) { return counts[is * n_i + ii]; }
    const T& at(std::size_t is, std::size_t ii) const { return counts[is * n_i + ii]; }
    double center_s(std::size_t is) const { return t0_s + (static_cast<double>(is) + 0.5) * bin_width; }
    double center_i(std::size_t ii) const { return t0_i + (static_cast<double>(ii) + 0.5) * bin_width; }
    bool same_geometry(const Histogram2D& o) const
    {
        return bin_width == o.bin_width && t0_s == o.t0_s && t0_i == o.t0_i && n_s == o.n_s &&
               n_i == o.n_i;
    }
};

using JtiHistogram = Histogram2D<std::uint32_t>;
using JtiDensity = Histogram2D<double>; // background-subtracted or analytic

struct Profile {
    double origin = 0.0; // axis value of element 0
    double step = kDefaultBinWidth;
    std::vector<double> values;

    double axis(std::size_t k) const { return origin + step * static_cast<double>(k); }
};

struct ProfileFit {
    double value = 0.0;
    double std_error = 0.0;
    double residual_rms = 0.0;
};

struct FringeFit {
    ProfileFit visibility;
    double theta = 0.0; // phase of a + b cos(delta_omega tau + theta)
    double theta_std_error = 0.0;
    double mean = 0.0;  // a
};

struct RingdownOptions {
    double exclude_halfwidth = 2.0 * 60e-12 / 2.3548; // 2 jitter sigma
    double fit_extent = 3.0;    // outer edge of fit window, in units of 1/gamma
    double floor_tail = 7.0;    // bins beyond this many 1/gamma estimate the flat floor
    bool subtract_floor = true;
};

// exp(-gamma |ts-ti|) [1 + cos(delta_omega (ts+ti) + theta)]
double jti_value(double ts, double ti, const SourceConfig& cfg);

// Floor binning with origins snapped to multiples of bin_width. Empty input gives n_s = n_i = 0.
JtiHistogram histogram(std::span<const TimePair> pairs, double bin_width);
// Fixed-geometry binning; pairs outside the range are dropped.
JtiHistogram histogram(std::span<const TimePair> pairs, double bin_width, double t0_s, double t0_i,
                       std::size_t n_s, std::size_t n_i);
// Sum of two histograms with identical geometry (throws std::invalid_argument otherwise).
JtiHistogram merge(const JtiHistogram& a, const JtiHistogram& b);

// Shifts each pair by a multiple of fold_period (which must be a multiple of the
// beat period) so that ts+ti lands in [0, 2 fold_period). The JTI is invariant under
// the shift, so the folded set fills one diamond-shaped frame.
std::vector<TimePair> fold_pairs(std::span<const TimePair> pairs, double fold_period);

// Histogram frame for folded pairs: both axes span
// [-max_delay/2, fold_period + max_delay/2).
JtiHistogram frame_histogram(std::span<const TimePair> folded, double fold_period, double max_delay,
                             double bin_width);

// Sums cells with |ts-ti| <= band into bins over ts+ti.
template <class T>
Profile diagonal_profile(const Histogram2D<T>& h, double band);
// Sums cells along each diagonal into bins over ts-ti.
template <class T>
Profile antidiagonal_profile(const Histogram2D<T>& h);

// Restricts a profile to lo <= axis <= hi.
Profile crop(const Profile& p, double lo, double hi);

// Linear least squares on a + c cos(w tau) + s sin(w tau). Requires two full
// fringe periods (2pi/delta_omega each); throws DataError otherwise.
FringeFit fit_visibility(const Profile& profile, double delta_omega);

// Weighted log-linear fit of counts to exp(-gamma |tau| + c). Value is 1/gamma in s.
ProfileFit fit_ringdown(const Profile& profile, const RingdownOptions& options = {});

extern template Profile diagonal_profile(const Histogram2D<std::uint32_t>&, double);
extern template Profile diagonal_profile(const Histogram2D<double>&, double);
extern template Profile antidiagonal_profile(const Histogram2D<std::uint32_t>&);
extern template Profile antidiagonal_profile(const Histogram2D<double>&);

} // namespace fbent
