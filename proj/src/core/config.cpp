#include "fbent/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <sstream>

#include "fbent/error.hpp"

namespace fbent {
namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view v, std::string_view key)
{
    v = trim(v);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("config: bad number for " + std::string(key) + ": '" + std::string(v) + "'");
    return out;
}

std::uint64_t parse_u64(std::string_view v, std::string_view key)
{
    v = trim(v);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view v, std::string_view key)
{
    v = trim(v);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError("config: bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::vector<std::string_view> split(std::string_view v, char sep)
{
    std::vector<std::string_view> out;
    while (true) {
        const auto p = v.find(sep);
        out.push_back(trim(v.substr(0, p)));
        if (p == std::string_view::npos)
            break;
        v = v.substr(p + 1);
    }
    return out;
}

std::vector<ArmSegment> parse_arm(std::string_view v, std::string_view key)
{
    std::vector<ArmSegment> arm;
    if (trim(v).empty())
        return arm;
    for (auto item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2)
            throw ConfigError("config: " + std::string(key) + " expects length:index items");
        arm.push_back({parse_double(parts[0], key), parse_double(parts[1], key)});
    }
    return arm;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string fmt_arm(const std::vector<ArmSegment>& arm)
{
    std::string s;
    for (std::size_t k = 0; k < arm.size(); ++k) {
        if (k)
            s += ", ";
        s += fmt(arm[k].length) + ":" + fmt(arm[k].index);
    }
    return s;
}

struct Field {
    std::function<void(RunConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define FBENT_DOUBLE(key, member)                                                                 \
    {                                                                                             \
        key, Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.member = parse_double(v, k); }, \
                   [](const RunConfig& c) { return fmt(c.member); }}                             \
    }

const std::vector<std::pair<std::string, Field>>& fields()
{
    static const std::vector<std::pair<std::string, Field>> table = {
        FBENT_DOUBLE("delta_omega", source.delta_omega),
        FBENT_DOUBLE("gamma", source.gamma),
        FBENT_DOUBLE("theta", source.theta),
        FBENT_DOUBLE("pair_rate", source.pair_rate),
        FBENT_DOUBLE("window", source.window),
        FBENT_DOUBLE("clock_offset", source.clock_offset),
        FBENT_DOUBLE("jitter_fwhm_signal", noise.jitter_fwhm_signal),
        FBENT_DOUBLE("jitter_fwhm_idler", noise.jitter_fwhm_idler),
        FBENT_DOUBLE("dark_rate_s", noise.dark_rate_s),
        FBENT_DOUBLE("dark_rate_i", noise.dark_rate_i),
        FBENT_DOUBLE("accidental_fraction", noise.accidental_fraction),
        FBENT_DOUBLE("accidental_span", noise.accidental_span),
        FBENT_DOUBLE("pump_leak_fraction", noise.pump_leak_fraction),
        FBENT_DOUBLE("phase_diffusion_D", noise.phase_diffusion_D),
        {"seed", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.noise.seed = parse_u64(v, k); },
                       [](const RunConfig& c) { return std::to_string(c.noise.seed); }}},
        {"eta_T", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                            const auto items = split(v, ',');
                            if (items.size() != 4)
                                throw ConfigError("config: eta_T expects 4 comma-separated values");
                            for (std::size_t i = 0; i < 4; ++i)
                                c.channels.eta_T[i] = parse_double(items[i], k);
                        },
                        [](const RunConfig& c) {
                            std::string s;
                            for (std::size_t i = 0; i < 4; ++i)
                                s += (i ? ", " : "") + fmt(c.channels.eta_T[i]);
                            return s;
                        }}},
        FBENT_DOUBLE("demux_visibility_signal", channels.demux_visibility_signal),
        FBENT_DOUBLE("demux_visibility_idler", channels.demux_visibility_idler),
        FBENT_DOUBLE("eta_signal_equatorial", channels.eta_signal_equatorial),
        FBENT_DOUBLE("eta_idler_equatorial", channels.eta_idler_equatorial),
        {"long_arm", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.fwi.long_arm = parse_arm(v, k); },
                           [](const RunConfig& c) { return fmt_arm(c.fwi.long_arm); }}},
        {"short_arm", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.fwi.short_arm = parse_arm(v, k); },
                            [](const RunConfig& c) { return fmt_arm(c.fwi.short_arm); }}},
        {"double_pass", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.fwi.double_pass = parse_bool(v, k); },
                              [](const RunConfig& c) { return std::string(c.fwi.double_pass ? "true" : "false"); }}},
        FBENT_DOUBLE("input_index", fwi.input_index),
    };
    return table;
}

#undef FBENT_DOUBLE

const Field* find_field(std::string_view key)
{
    for (const auto& [name, f] : fields())
        if (name == key)
            return &f;
    return nullptr;
}

} // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value)
{
    key = trim(key);
    // Unit-friendly aliases.
    if (key == "bin_spacing_hz") {
        cfg.source.delta_omega = 2.0 * std::numbers::pi * parse_double(value, key);
        return;
    }
    if (key == "ringdown") {
        const double r = parse_double(value, key);
        if (!(r > 0.0))
            throw ConfigError("config: ringdown must be positive");
        cfg.source.gamma = 1.0 / r;
        return;
    }
    const Field* f = find_field(key);
    if (!f)
        throw ConfigError("config: unknown key '" + std::string(key) + "'");
    f->set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, std::string_view key)
{
    const Field* f = find_field(trim(key));
    if (!f)
        throw ConfigError("config: unknown key '" + std::string(key) + "'");
    return f->get(cfg);
}

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields())
            k.push_back(name);
        return k;
    }();
    return keys;
}

RunConfig parse_config(std::istream& is, const RunConfig& base)
{
    RunConfig cfg = base;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string_view v = line;
        if (const auto hash = v.find('#'); hash != std::string_view::npos)
            v = v.substr(0, hash);
        v = trim(v);
        if (v.empty())
            continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        try {
            set_config_value(cfg, v.substr(0, eq), v.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const RunConfig& base)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config " + path);
    return parse_config(is, base);
}

std::string to_text(const RunConfig& cfg)
{
    std::string out;
    for (const auto& [name, f] : fields())
        out += name + " = " + f.get(cfg) + "\n";
    return out;
}

void validate(const RunConfig& cfg)
{
    cfg.source.validate();
    cfg.noise.validate();
    cfg.channels.validate();
    cfg.fwi.validate();
}

} // namespace fbent
