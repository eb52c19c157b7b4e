#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fbent/jti.hpp"
#include "fbent/timetag.hpp"

namespace fbent {

inline constexpr double kDefaultCoincidenceWindow = 5e-9; // s, half-width

struct Coincidence {
    double ts = 0.0; // s
    double ti = 0.0; // s
    std::uint8_t ch_s = kSignalTimeResolved;
    std::uint8_t ch_i = kIdlerTimeResolved;
};

// Every (signal, idler) tag pair with |ts - ti| <= window, ordered by signal time.
// Signal channels are {0, 2, 3}, idler channels {1, 4, 5}.
std::vector<Coincidence> find_coincidences(const TimeTagStream& stream,
                                           double window = kDefaultCoincidenceWindow);

std::vector<TimePair> to_time_pairs(std::span<const Coincidence> coincidences);

// Counts by demux output port for coincidences where both sides went through an
// interferometer, [signal port][idler port].
std::array<std::array<std::uint64_t, 2>, 2> port_counts(std::span<const Coincidence> coincidences,
                                                         double band);

} // namespace fbent
