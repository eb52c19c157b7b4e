#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fbent/jti.hpp"
#include "fbent/quantum.hpp"

namespace fbent {

// Post-selection of equatorial outcomes from detection times. A side reports +1 when its
// phase delta_omega * t lies within slot_width/2 (in time) of its target phase, -1 within
// slot_width/2 of target + pi; anything else is discarded, as is |ts - ti| > band.
struct PhaseSlotRule {
    double slot_width = 0.0; // s
    double phi_a = 0.0;      // signal target phase, rad
    double phi_b = 0.0;      // idler target phase, rad
    double band = kDefaultDiagonalBand;

    // Throws ConfigError unless 0 < slot_width < T_b/4 and band > 0.
    void validate(double delta_omega) const;
};

// T_b/20.
double default_slot_width(double delta_omega);

using CellCounts = std::array<std::array<std::uint64_t, 2>, 2>; // [signal][idler], index 0 = +1

struct CorrelatorOptions {
    // Ringdown rate used to undo the exp(-gamma |ts-ti|) weighting of each outcome cell.
    // Zero disables the correction.
    double gamma = 0.0;
    // Flat accidental density per unit ts-ti (pairs/s), subtracted cell by cell. Zero disables.
    double background_density = 0.0;
};

struct CorrelatorEstimate {
    double value = 0.0;
    double std_error = 1.0;
    std::uint64_t n_used = 0;
    bool defined = false; // false when no event was retained
    CellCounts counts{};
    JointProbabilities probabilities{}; // corrected and normalized; uniform when undefined
};

// Outcome cell of one pair under a rule: 0..3 as 2*signal + idler, or -1 when rejected.
int outcome_cell(const TimePair& pair, const PhaseSlotRule& rule, double delta_omega);

// Per-cell weights used by the estimator: efficiency[a][b] integrates exp(-gamma|tau|) over the
// slot squares inside the band; area[a][b] is the slot area inside the band per unit time,
// used to scale a flat background.
struct CellGeometry {
    std::array<std::array<double, 2>, 2> efficiency{};
    std::array<std::array<double, 2>, 2> area{};
};
CellGeometry cell_geometry(const PhaseSlotRule& rule, double delta_omega, double gamma);

// Turns raw cell counts into an estimate. |value| <= 1 by construction.
CorrelatorEstimate correlator_from_cells(const CellCounts& counts, const CellGeometry& geometry,
                                         double background_density);
// Plain count arithmetic with per-cell efficiencies (1 for raw counts).
CorrelatorEstimate correlator_from_counts(const std::array<std::array<double, 2>, 2>& counts,
                                          const std::array<std::array<double, 2>, 2>& efficiency = {{{1.0, 1.0}, {1.0, 1.0}}});

// Throws DataError for an empty input set.
CorrelatorEstimate equatorial_correlator(std::span<const TimePair> pairs, const PhaseSlotRule& rule,
                                         double delta_omega, const CorrelatorOptions& options = {});

// Accidental density per unit ts-ti from pairs with inner < |ts-ti| <= outer.
// Throws DataError when the sideband is empty or has zero width.
double estimate_background_density(std::span<const TimePair> pairs, double inner, double outer);

struct ChshOptions {
    double band = kDefaultDiagonalBand;
    double slot_width = 0.0;   // 0 selects T_b/20
    double gamma = 0.0;        // efficiency correction, 0 disables
    bool subtract_background = false;
    double sideband_inner = 0.0; // 0 selects 5/gamma
    double sideband_outer = 5e-9;
    bool slot_bias_correction = false; // divide correlators by sinc^2(delta_omega w / 2)
};

// Phase offsets realizing A0 = X, A1 = Y, B0 = (X-Y)/sqrt2, B1 = (X+Y)/sqrt2.
inline constexpr std::array<double, 2> kChshSignalOffsets{0.0, std::numbers::pi / 2.0};
inline constexpr std::array<double, 2> kChshIdlerOffsets{-std::numbers::pi / 4.0, std::numbers::pi / 4.0};

struct ChshPoint {
    double t = 0.0; // reference time within one beat period, s
    std::array<CorrelatorEstimate, 4> correlators; // A0B0, A0B1, A1B0, A1B1
    double s = 0.0;
    double s_std_error = 0.0;
};

struct ChshScan {
    std::vector<ChshPoint> points;
    double max_s_raw = 0.0; // largest |S| over the grid
    double t_max_raw = 0.0;
    // Each correlator is fitted as c cos(2 dw t) + s sin(2 dw t) over the scan, which pools the
    // whole period; max_s_fit is the peak of the fitted |S(t)|.
    double max_s_fit = 0.0;
    double max_s_fit_std_error = 0.0;
    double t_max_fit = 0.0;
    double background_density = 0.0;
};

// Scan over reference times t in [0, T_b) on a grid of pitch slot_width. Both sides are
// evaluated at the same t, the setting offsets added to delta_omega * t.
ChshScan chsh_scan(std::span<const TimePair> pairs, double delta_omega, const ChshOptions& options = {});

struct SteeringResult {
    double two_basis_lhs = 0.0;
    double three_basis_lhs = 0.0;
    double two_basis_bound = 0.0;
    double three_basis_bound = 0.0;
    bool two_basis_violated = false;
    bool three_basis_violated = false;
};
SteeringResult steering(double xx, double yy, double zz);

// H2(p) in bits with 0 log 0 = 0. Throws std::invalid_argument outside [0, 1].
double binary_entropy(double p);
// H(a_s | b_i) in bits. Throws std::invalid_argument for negative entries or sum != 1 (1e-9).
double conditional_entropy(const JointProbabilities& p);

struct EntropicCertificate {
    double two_term_sum = 0.0;   // H(X|X) + H(Z|Z), bound 1
    double three_term_sum = 0.0; // H(X|X) + H(Y|Y) + H(Z|Z), bound 2
    bool two_term_violated = false;
    bool three_term_violated = false;
};
EntropicCertificate entropic_certificate(double h_xx, double h_yy, double h_zz);

struct QkdReport {
    double c = 0.0;
    double qber_zz = 0.0;
    double qber_eq = 0.0;
    double key_rate_per_coincidence = 0.0; // bits
    double key_rate = 0.0;                  // bits/s
    double q = 0.5;
    double f = 1.1;
    double r = 1.0;
};
// Throws std::invalid_argument unless q in (0,1], f >= 1, r > 0 and every correlator is in [-1,1].
QkdReport qkd_report(double xx, double yx, double zz, double q = 0.5, double f = 1.1, double r = 1.0);

// Flat-floor subtraction on a histogram. The floor is the mean count of cells whose centers
// satisfy |ts-ti| > inner and tau_lo <= ts+ti < tau_hi; it is removed from every cell inside
// the tau range and negatives are clamped to zero.
struct BackgroundOptions {
    double inner = 0.0; // required, s
    double tau_lo = -std::numeric_limits<double>::infinity();
    double tau_hi = std::numeric_limits<double>::infinity();
};
struct BackgroundSubtracted {
    JtiDensity density;
    double floor_per_bin = 0.0;
    double clamp_mass = 0.0; // total of the clamped negative parts
    std::uint64_t sideband_bins = 0;
};
// Throws DataError when no sideband cell exists.
BackgroundSubtracted subtract_background(const JtiHistogram& h, const BackgroundOptions& options);

struct BootstrapStat {
    double estimate = 0.0;
    double std_error = 0.0;
};

struct CertificationInputs {
    std::span<const TimePair> equatorial; // both sides time resolved
    std::array<std::array<double, 2>, 2> zz_counts{}; // [signal port][idler port]
    std::array<std::array<double, 2>, 2> zz_efficiency{{{1.0, 1.0}, {1.0, 1.0}}};
    double delta_omega = kDefaultDeltaOmega;
    ChshOptions chsh;
    std::uint32_t bootstrap_resamples = 1000;
    std::uint64_t seed = 1;
};

struct CertificationReport {
    ChshScan chsh;
    CorrelatorEstimate xx, yy, zz;
    SteeringResult steering;
    double h_xx = 0.0, h_yy = 0.0, h_zz = 0.0;
    EntropicCertificate entropic;
    BootstrapStat steering_three, steering_two, entropy_three, entropy_two;
};

// X and Y are read at the reference time where the fitted CHSH value peaks. Uncertainties
// come from a Poisson bootstrap over coincidence records.
CertificationReport certify(const CertificationInputs& inputs);

} // namespace fbent
