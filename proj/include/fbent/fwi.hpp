#pragma once

#include <string>
#include <vector>

namespace fbent {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kCarrierWavelength = 1550e-9; // m

struct ArmSegment {
    double length = 0.0; // single-pass physical length, m
    double index = 1.0;
};

struct FwiDesign {
    std::vector<ArmSegment> long_arm;
    std::vector<ArmSegment> short_arm;
    bool double_pass = true; // retro-reflector: every segment is traversed twice
    double input_index = 1.0;

    void validate() const; // throws ConfigError
    double pass_factor() const { return double_pass ? 2.0 : 1.0; }
    // Sum L/n over the long arm minus the short arm, single pass. Zero when field widened.
    double widening_coefficient() const;
};

// Long arm: 1 cm air, 10 cm N-BK7 (n = 1.5007), 1 cm air. Short arm: 7.85 cm air. Double pass.
FwiDesign reference_design();

// Optical path difference at input angle alpha (second-order Taylor model). Warns above 0.1 rad.
double opd(const FwiDesign& design, double alpha);

struct DemuxDelay {
    double delay = 0.0;       // s
    double bin_spacing = 0.0; // rad/s
};

// delay = dL/c, bin spacing = pi c / dL. Throws std::invalid_argument for dL <= 0.
DemuxDelay demux_delay(double delta_L);
// Inverse: the path difference that demultiplexes bins spaced by delta_omega.
double demux_length(double delta_omega);

struct AirGaps {
    double long_arm = 0.02;  // fixed air in the long arm, single pass, m
    double short_arm = 0.0;  // fixed air in the short arm besides the solved length, m
};

// Solves n g + a_l - (a_s + s) = dL/m and g/n + a_l - (a_s + s) = 0 for the glass length g
// and the extra short-arm length s. Throws ConfigError naming the variable when infeasible.
FwiDesign solve_widened(double n_glass, const AirGaps& gaps, double delta_L_target, bool double_pass);

// All-air design with the same path difference and no field widening.
FwiDesign unwidened_design(double delta_L_target, double short_arm_length, bool double_pass);

struct DemuxVisibilityOptions {
    double carrier_wavelength = kCarrierWavelength;
    double lorentz_span = 10.0;    // integrate detuning over +-span*gamma
    double relative_tolerance = 1e-8;
};

// Port-extinction contrast of the interferometer, tuned so the bin center exits port 0 at
// normal incidence, for a Lorentzian bin of FWHM gamma (rad/s) and a Gaussian spread of
// input angles with standard deviation alpha_spread (rad).
double demux_visibility(const FwiDesign& design, double gamma, double delta_omega, double alpha_spread,
                        const DemuxVisibilityOptions& options = {});

} // namespace fbent
