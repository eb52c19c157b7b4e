#include "fbent/coincidence.hpp"

#include <cmath>
#include <stdexcept>

namespace fbent {

std::vector<Coincidence> find_coincidences(const TimeTagStream& stream, double window)
{
    if (!(window > 0.0))
        throw std::invalid_argument("find_coincidences: window must be positive");
    const auto w_ps = static_cast<std::int64_t>(std::llround(window * 1e12));

    std::vector<const TimeTag*> idlers;
    for (const auto& tag : stream.records)
        if (is_idler_channel(tag.channel))
            idlers.push_back(&tag);

    std::vector<Coincidence> out;
    std::size_t lo = 0;
    for (const auto& tag : stream.records) {
        if (!is_signal_channel(tag.channel))
            continue;
        const auto t = static_cast<std::int64_t>(tag.timestamp_ps);
        while (lo < idlers.size() && static_cast<std::int64_t>(idlers[lo]->timestamp_ps) < t - w_ps)
            ++lo;
        for (std::size_t k = lo; k < idlers.size(); ++k) {
            const auto ti = static_cast<std::int64_t>(idlers[k]->timestamp_ps);
            if (ti > t + w_ps)
                break;
            out.push_back({static_cast<double>(t) * 1e-12, static_cast<double>(ti) * 1e-12, tag.channel,
                           idlers[k]->channel});
        }
    }
    return out;
}

std::vector<TimePair> to_time_pairs(std::span<const Coincidence> coincidences)
{
    std::vector<TimePair> out;
    out.reserve(coincidences.size());
    for (const auto& c : coincidences)
        out.push_back({c.ts, c.ti});
    return out;
}

std::array<std::array<std::uint64_t, 2>, 2> port_counts(std::span<const Coincidence> coincidences,
                                                         double band)
{
    std::array<std::array<std::uint64_t, 2>, 2> out{};
    for (const auto& c : coincidences) {
        const int ps = port_of_channel(c.ch_s), pi = port_of_channel(c.ch_i);
        if (ps < 0 || pi < 0 || std::abs(c.ts - c.ti) > band)
            continue;
        ++out[ps][pi];
    }
    return out;
}

} // namespace fbent
