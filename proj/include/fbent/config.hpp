#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fbent/fwi.hpp"
#include "fbent/jti.hpp"
#include "fbent/timetag.hpp"

namespace fbent {

// Everything a run can be configured with. The text form is `key = value` per line, `#`
// comments, keys equal to the field names (eta_T as a comma list, FWI arms as
// "length:index, ..." lists).
struct RunConfig {
    SourceConfig source;
    NoiseConfig noise;
    ChannelModel channels;
    FwiDesign fwi = reference_design();
};

// Throws ConfigError (with the line number) on unknown keys or unparsable values.
RunConfig parse_config(std::istream& is, const RunConfig& base = {});
RunConfig load_config(const std::string& path, const RunConfig& base = {});

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);
const std::vector<std::string>& config_keys();

// Round-trips through parse_config.
std::string to_text(const RunConfig& cfg);

// Validates every section; throws ConfigError.
void validate(const RunConfig& cfg);

} // namespace fbent
