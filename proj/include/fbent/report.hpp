#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "fbent/analysis.hpp"
#include "fbent/fwi.hpp"
#include "fbent/jti.hpp"
#include "fbent/quantum.hpp"
#include "fbent/tomography.hpp"

namespace fbent {

using Json = nlohmann::ordered_json;

// Row-major array of 16 [re, im] pairs.
Json density_to_json(const Matrix4& m);
// Throws DataError on a malformed array; validation as a state is up to the caller.
Matrix4 density_from_json(const Json& j);

Json to_json(const ProfileFit& f);
Json to_json(const FringeFit& f);
Json to_json(const CorrelatorEstimate& e);
Json to_json(const ChshScan& s);
Json to_json(const SteeringResult& s);
Json to_json(const EntropicCertificate& c);
Json to_json(const BootstrapStat& b);
Json to_json(const CertificationReport& r);
Json to_json(const QkdReport& r);
Json to_json(const TomographyResult& r);
Json to_json(const FwiDesign& d);

// Count tables: {"settings": [{"bases": "EE", "exposure": 1, "counts": [...]}, ...]}.
Json settings_to_json(std::span<const MeasurementSetting> settings);
std::vector<MeasurementSetting> settings_from_json(const Json& j);

// Plot-ready tables.
void write_profile_csv(std::ostream& os, const Profile& p, const char* axis_name);
void write_scan_csv(std::ostream& os, const ChshScan& s);

} // namespace fbent
