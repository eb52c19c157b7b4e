#pragma once

#include <iosfwd>
#include <string>

#include "fbent/jti.hpp"
#include "fbent/timetag.hpp"

namespace fbent {

// Binary layout: "FBENTTAG", u32 version (1), u32 reserved, then packed little-endian
// records of u8 channel + u64 timestamp_ps (9 bytes each).
inline constexpr char kTagMagic[8] = {'F', 'B', 'E', 'N', 'T', 'T', 'A', 'G'};
inline constexpr std::uint32_t kTagVersion = 1;

// All readers throw DataError on malformed input and validate the stream.
void write_tags_binary(std::ostream& os, const TimeTagStream& stream);
TimeTagStream read_tags_binary(std::istream& is);
// "channel,timestamp_ps" with that header line.
void write_tags_csv(std::ostream& os, const TimeTagStream& stream);
TimeTagStream read_tags_csv(std::istream& is);

// Picks the format from the first bytes; throws DataError if the file cannot be opened.
TimeTagStream read_tags_file(const std::string& path);
void write_tags_file(const std::string& path, const TimeTagStream& stream, bool csv = false);

// Histogram binary: f64 bin_width, f64 t0_s, f64 t0_i, u64 n_s, u64 n_i, then row-major u32.
void write_histogram_binary(std::ostream& os, const JtiHistogram& h);
JtiHistogram read_histogram_binary(std::istream& is);
// "ts_center,ti_center,count" rows, zero cells omitted.
void write_histogram_csv(std::ostream& os, const JtiHistogram& h);

} // namespace fbent
