#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbent/coincidence.hpp"
#include "fbent/jti.hpp"
#include "fbent/quantum.hpp"
#include "fbent/timetag.hpp"

namespace fbent {

// Shared description of how detection times and ports become outcomes.
struct TomographyModel {
    double delta_omega = kDefaultDeltaOmega;
    double gamma = 1.0 / kDefaultRingdown;
    double band = kDefaultDiagonalBand;
    int slots = 8;            // phase slots per optical period 2 pi / delta_omega, per arm
    double slot_width = 0.0;  // s; 0 makes the slots tile the period
    ChannelModel channels;

    void validate() const; // throws ConfigError
    double period() const;  // 2 pi / delta_omega
    double effective_slot_width() const;
    // Number of outcomes of a setting: slots or 2 per side.
    std::size_t outcome_count(SettingBases bases) const;
};

// Counts of one physical setting. Layout is row-major [signal outcome][idler outcome], where
// an equatorial outcome is a phase-slot index and a Z outcome the demux port.
struct MeasurementSetting {
    SettingBases bases;
    std::vector<double> counts;
    double exposure = 1.0; // relative acquisition (number of emitted pairs)
};

struct TomoElement {
    Matrix4 povm;       // expected-count operator per emitted pair, efficiencies included
    double count = 0.0;
    std::string label;  // e.g. "EE[3,5]", "ZE[1,0]"
};

struct ProjectorSetInfo {
    int rank = 0;
    double condition_number = 0.0;
};

// Detection operators for every outcome of every setting. An equatorial outcome integrates
// the time-resolved projectors (|0> + e^{i dw t}|1>)/sqrt2 over its slot, weighted by the
// exp(-gamma |ts-ti|) envelope inside the band; Z outcomes are |j><j| times the port
// efficiency. Throws DataError naming the missing Pauli directions when the set is not
// informationally complete.
std::vector<TomoElement> build_projector_set(std::span<const MeasurementSetting> settings,
                                             const TomographyModel& model, ProjectorSetInfo* info = nullptr);

// Outcome counts of one setting from its coincidences.
MeasurementSetting count_setting(std::span<const Coincidence> coincidences, SettingBases bases,
                                 const TomographyModel& model);

// Exact expected counts for n emitted pairs of the given state.
MeasurementSetting expected_setting(const TwoQubitState& state, SettingBases bases,
                                    const TomographyModel& model, double n_emitted);

// The four settings of a standard run, in order EE, EZ, ZE, ZZ.
std::vector<SettingBases> standard_settings();

struct MleOptions {
    int max_iterations = 10000;
    double relative_tolerance = 1e-10; // on the log-likelihood change per step
    double gradient_tolerance = 1e-8;  // on the gradient of log-likelihood per count
    bool record_trace = false;
};

struct TomographyResult {
    TwoQubitState rho = TwoQubitState::maximally_mixed();
    double fidelity_to_phi_plus = 0.0;
    double max_bell_fidelity = 0.0; // over the family (|00> + e^{i theta}|11>)/sqrt2
    double bell_phase = 0.0;        // the maximizing theta
    double purity = 0.0;
    double log_likelihood = 0.0; // Poisson, with the pair number profiled out
    double pair_number = 0.0;    // fitted N
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<double> trace; // log-likelihood after each accepted step, if requested
};

// Poisson maximum likelihood over rho = T^dag T / Tr, T lower triangular, starting at the
// maximally mixed state; limited-memory quasi-Newton directions with Armijo backtracking.
// Every accepted step is checked not to lower the likelihood. Does not throw on
// non-convergence: check `converged`.
TomographyResult mle_reconstruct(std::span<const TomoElement> elements, const MleOptions& options = {});

struct TomographyUncertainty {
    double fidelity_std = 0.0;
    double purity_std = 0.0;
    int resamples = 0;
};

// Parametric bootstrap: Poisson counts at the fitted means, refitted n_boot times.
TomographyUncertainty uncertainty(std::span<const TomoElement> elements, const TomographyResult& result,
                                  int n_boot, std::uint64_t seed = 1);

} // namespace fbent
