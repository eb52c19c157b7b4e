#include "fbent/report.hpp"

#include <ostream>

#include "fbent/error.hpp"

namespace fbent {

Json density_to_json(const Matrix4& m)
{
    Json arr = Json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            arr.push_back({m(r, c).real(), m(r, c).imag()});
    return arr;
}

Matrix4 density_from_json(const Json& j)
{
    if (!j.is_array() || j.size() != 16)
        throw DataError("density matrix: expected 16 [re, im] pairs");
    Matrix4 m;
    for (int k = 0; k < 16; ++k) {
        const Json& e = j[static_cast<std::size_t>(k)];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw DataError("density matrix: entries must be [re, im] number pairs");
        m(k / 4, k % 4) = Complex(e[0].get<double>(), e[1].get<double>());
    }
    return m;
}

Json to_json(const ProfileFit& f)
{
    return {{"value", f.value}, {"stderr", f.std_error}, {"residual_rms", f.residual_rms}};
}

Json to_json(const FringeFit& f)
{
    return {{"visibility", to_json(f.visibility)},
            {"theta", f.theta},
            {"theta_stderr", f.theta_std_error},
            {"mean", f.mean}};
}

Json to_json(const CorrelatorEstimate& e)
{
    Json counts = Json::array(), probs = Json::array();
    for (int a = 0; a < 2; ++a) {
        counts.push_back({e.counts[a][0], e.counts[a][1]});
        probs.push_back({e.probabilities[a][0], e.probabilities[a][1]});
    }
    return {{"value", e.value}, {"stderr", e.std_error}, {"n_used", e.n_used},
            {"defined", e.defined}, {"counts", counts}, {"probabilities", probs}};
}

Json to_json(const ChshScan& s)
{
    Json pts = Json::array();
    for (const auto& p : s.points) {
        Json e = Json::array();
        for (const auto& c : p.correlators)
            e.push_back(c.value);
        pts.push_back({{"t", p.t}, {"S", p.s}, {"S_stderr", p.s_std_error}, {"E", e}});
    }
    return {{"max_S_fit", s.max_s_fit},
            {"max_S_fit_stderr", s.max_s_fit_std_error},
            {"t_max_fit", s.t_max_fit},
            {"max_S_raw", s.max_s_raw},
            {"t_max_raw", s.t_max_raw},
            {"background_density", s.background_density},
            {"points", pts}};
}

Json to_json(const SteeringResult& s)
{
    return {{"two_basis_lhs", s.two_basis_lhs},   {"two_basis_bound", s.two_basis_bound},
            {"two_basis_violated", s.two_basis_violated}, {"three_basis_lhs", s.three_basis_lhs},
            {"three_basis_bound", s.three_basis_bound}, {"three_basis_violated", s.three_basis_violated}};
}

Json to_json(const EntropicCertificate& c)
{
    return {{"two_term_sum", c.two_term_sum},
            {"two_term_bound", 1.0},
            {"two_term_violated", c.two_term_violated},
            {"three_term_sum", c.three_term_sum},
            {"three_term_bound", 2.0},
            {"three_term_violated", c.three_term_violated}};
}

Json to_json(const BootstrapStat& b)
{
    return {{"estimate", b.estimate}, {"stderr", b.std_error}};
}

Json to_json(const CertificationReport& r)
{
    return {{"chsh", to_json(r.chsh)},
            {"correlators", {{"XX", to_json(r.xx)}, {"YY", to_json(r.yy)}, {"ZZ", to_json(r.zz)}}},
            {"steering", to_json(r.steering)},
            {"entropies", {{"H_XX", r.h_xx}, {"H_YY", r.h_yy}, {"H_ZZ", r.h_zz}}},
            {"entropic", to_json(r.entropic)},
            {"bootstrap",
             {{"steering_three", to_json(r.steering_three)},
              {"steering_two", to_json(r.steering_two)},
              {"entropy_three", to_json(r.entropy_three)},
              {"entropy_two", to_json(r.entropy_two)}}}};
}

Json to_json(const QkdReport& r)
{
    return {{"C", r.c},
            {"qber_zz", r.qber_zz},
            {"qber_eq", r.qber_eq},
            {"key_rate_per_coincidence", r.key_rate_per_coincidence},
            {"key_rate", r.key_rate},
            {"params", {{"q", r.q}, {"f", r.f}, {"R", r.r}}}};
}

Json to_json(const TomographyResult& r)
{
    return {{"rho", density_to_json(r.rho.matrix())},
            {"fidelity_to_phi_plus", r.fidelity_to_phi_plus},
            {"max_bell_fidelity", r.max_bell_fidelity},
            {"bell_phase", r.bell_phase},
            {"purity", r.purity},
            {"log_likelihood", r.log_likelihood},
            {"pair_number", r.pair_number},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"gradient_norm", r.gradient_norm}};
}

Json to_json(const FwiDesign& d)
{
    auto arm = [](const std::vector<ArmSegment>& a) {
        Json out = Json::array();
        for (const auto& s : a)
            out.push_back({{"length", s.length}, {"index", s.index}});
        return out;
    };
    return {{"long_arm", arm(d.long_arm)},
            {"short_arm", arm(d.short_arm)},
            {"double_pass", d.double_pass},
            {"input_index", d.input_index},
            {"widening_coefficient", d.widening_coefficient()}};
}

Json settings_to_json(std::span<const MeasurementSetting> settings)
{
    Json arr = Json::array();
    for (const auto& s : settings) {
        std::string code;
        code += s.bases.signal == Basis::Z ? 'Z' : 'E';
        code += s.bases.idler == Basis::Z ? 'Z' : 'E';
        arr.push_back({{"bases", code}, {"exposure", s.exposure}, {"counts", s.counts}});
    }
    return {{"settings", arr}};
}

std::vector<MeasurementSetting> settings_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("settings") || !j["settings"].is_array())
        throw DataError("count table: expected an object with a \"settings\" array");
    std::vector<MeasurementSetting> out;
    for (const auto& s : j["settings"]) {
        MeasurementSetting m;
        const auto code = s.value("bases", std::string{});
        if (code.size() != 2 || (code[0] != 'E' && code[0] != 'Z') || (code[1] != 'E' && code[1] != 'Z'))
            throw DataError("count table: bases must be one of EE, EZ, ZE, ZZ");
        m.bases.signal = code[0] == 'Z' ? Basis::Z : Basis::Equatorial;
        m.bases.idler = code[1] == 'Z' ? Basis::Z : Basis::Equatorial;
        m.exposure = s.value("exposure", 1.0);
        if (!s.contains("counts") || !s["counts"].is_array())
            throw DataError("count table: each setting needs a counts array");
        for (const auto& c : s["counts"]) {
            if (!c.is_number())
                throw DataError("count table: counts must be numbers");
            m.counts.push_back(c.get<double>());
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_profile_csv(std::ostream& os, const Profile& p, const char* axis_name)
{
    os << axis_name << ",counts\n";
    os.precision(12);
    for (std::size_t k = 0; k < p.values.size(); ++k)
        os << p.axis(k) << ',' << p.values[k] << '\n';
}

void write_scan_csv(std::ostream& os, const ChshScan& s)
{
    os << "t_s,S,S_stderr,E00,E01,E10,E11\n";
    os.precision(12);
    for (const auto& p : s.points) {
        os << p.t << ',' << p.s << ',' << p.s_std_error;
        for (const auto& c : p.correlators)
            os << ',' << c.value;
        os << '\n';
    }
}

} // namespace fbent
