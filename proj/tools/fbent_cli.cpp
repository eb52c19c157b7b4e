// fbent command-line driver. Talks to the library only through the C interface.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbent/fbent.h"

using Json = nlohmann::ordered_json;

namespace {

// Failure carrying the process exit code.
struct Failure {
    int exit_code;
    std::string kind;
    std::string message;
};

int exit_code_for(fbent_status s)
{
    switch (s) {
    case FBENT_OK: return 0;
    case FBENT_ERR_CONFIG:
    case FBENT_ERR_ARGUMENT: return 2;
    case FBENT_ERR_DATA:
    case FBENT_ERR_IO: return 3;
    case FBENT_ERR_NONCONVERGED: return 4;
    default: return 1;
    }
}

const char* kind_for(fbent_status s)
{
    switch (s) {
    case FBENT_ERR_CONFIG: return "config";
    case FBENT_ERR_ARGUMENT: return "argument";
    case FBENT_ERR_DATA: return "data";
    case FBENT_ERR_IO: return "io";
    case FBENT_ERR_NONCONVERGED: return "nonconvergence";
    default: return "internal";
    }
}

void check(fbent_status s)
{
    if (s != FBENT_OK)
        throw Failure{exit_code_for(s), kind_for(s), fbent_last_error()};
}

// Takes ownership of a library string.
std::string take(char* s)
{
    std::string out = s ? s : "";
    fbent_free_string(s);
    return out;
}

struct ConfigDeleter {
    void operator()(fbent_config* c) const { fbent_config_destroy(c); }
};
struct StreamDeleter {
    void operator()(fbent_stream* s) const { fbent_stream_destroy(s); }
};
using ConfigPtr = std::unique_ptr<fbent_config, ConfigDeleter>;
using StreamPtr = std::unique_ptr<fbent_stream, StreamDeleter>;

StreamPtr read_stream(const std::string& path)
{
    fbent_stream* s = nullptr;
    check(fbent_stream_read(path.c_str(), &s));
    return StreamPtr(s);
}

std::uint64_t fnv1a(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Failure{3, "io", "cannot read back " + path};
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof buf);
        for (std::streamsize k = 0; k < is.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char b[17];
    std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
    return b;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os || !(os << text))
        throw Failure{3, "io", "cannot write " + path};
}

std::string read_text(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Failure{3, "io", "cannot open " + path};
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Json parse_json_file(const std::string& path)
{
    try {
        return Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        throw Failure{3, "data", path + ": " + e.what()};
    }
}

// Options shared by every subcommand.
struct Common {
    std::string config_path;
    std::string manifest_path;
    std::map<std::string, std::string> overrides; // config key -> flag value
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

// Every config key becomes a long flag of the same name.
void add_config_flags(CLI::App* app, Common& common, const std::vector<std::string>& keys)
{
    app->add_option("--config", common.config_path, "key = value configuration file");
    app->add_option("--manifest", common.manifest_path, "manifest path (default: <first output>.manifest.json)");
    for (const auto& k : keys) {
        if (app->get_option_no_throw("--" + k))
            continue; // a subcommand flag of the same name wins
        app->add_option_function<std::string>(
               "--" + k, [&common, k](const std::string& v) { common.overrides[k] = v; }, "config override")
            ->group("Config overrides");
    }
}

std::vector<std::string> config_keys()
{
    fbent_config* c = nullptr;
    check(fbent_config_create(&c));
    ConfigPtr cfg(c);
    char* text = nullptr;
    check(fbent_config_to_text(cfg.get(), &text));
    std::istringstream is(take(text));
    std::vector<std::string> keys;
    for (std::string line; std::getline(is, line);) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            continue;
        std::string k = line.substr(0, eq);
        while (!k.empty() && k.back() == ' ')
            k.pop_back();
        keys.push_back(k);
    }
    return keys;
}

ConfigPtr make_config(const Common& common)
{
    fbent_config* c = nullptr;
    if (common.config_path.empty())
        check(fbent_config_create(&c));
    else if (const fbent_status st = fbent_config_load(common.config_path.c_str(), &c); st == FBENT_ERR_IO)
        throw Failure{2, "config", fbent_last_error()}; // an unreadable config is a config problem
    else
        check(st);
    ConfigPtr cfg(c);
    for (const auto& [k, v] : common.overrides)
        check(fbent_config_set(cfg.get(), k.c_str(), v.c_str()));
    check(fbent_config_validate(cfg.get()));
    return cfg;
}

void write_manifest(const std::string& subcommand, const Common& common, const fbent_config* cfg)
{
    if (common.outputs.empty() && common.manifest_path.empty())
        return;
    const std::string path =
        common.manifest_path.empty() ? common.outputs.front() + ".manifest.json" : common.manifest_path;
    Json m;
    m["subcommand"] = subcommand;
    m["version"] = fbent_version();
    m["config"] = common.config_path;
    if (cfg) {
        char* seed = nullptr;
        check(fbent_config_get(cfg, "seed", &seed));
        m["seed"] = take(seed);
        char* text = nullptr;
        check(fbent_config_to_text(cfg, &text));
        const std::string t = take(text);
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : t) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        m["effective_config_fnv1a64"] = hex64(h);
    }
    m["overrides"] = common.overrides;
    Json in = Json::array();
    for (const auto& p : common.inputs)
        in.push_back({{"path", p}, {"fnv1a64", hex64(fnv1a(p))}});
    m["inputs"] = in;
    Json out = Json::array();
    for (const auto& p : common.outputs)
        out.push_back({{"path", p}, {"fnv1a64", hex64(fnv1a(p))}});
    m["outputs"] = out;
    write_text(path, m.dump(2) + "\n");
}

fbent_basis parse_basis(char c)
{
    if (c == 'E' || c == 'e')
        return FBENT_EQUATORIAL;
    if (c == 'Z' || c == 'z')
        return FBENT_Z;
    throw Failure{2, "argument", std::string("basis must be E or Z, got '") + c + "'"};
}

double correlator_value(const Json& j, const char* name)
{
    if (j.contains("correlators") && j["correlators"].contains(name))
        return j["correlators"][name]["value"].get<double>();
    if (j.contains(name)) {
        const auto& v = j[name];
        return v.is_object() ? v["value"].get<double>() : v.get<double>();
    }
    throw Failure{3, "data", std::string("correlator JSON lacks ") + name};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Frequency-bin entanglement toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fbent_version());

    Common common;
    std::vector<std::string> keys;
    try {
        keys = config_keys();
    } catch (const Failure& f) {
        std::cerr << Json{{"error", {{"kind", f.kind}, {"message", f.message}}}}.dump() << '\n';
        return f.exit_code;
    }

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo time tags");
    std::uint64_t n_pairs = 0, trials = 0, substream = 0;
    std::string sim_out, setting;
    bool sim_csv = false;
    sim->add_option("--n-pairs,--n_pairs", n_pairs, "emitted pairs (time-resolved run)");
    sim->add_option("--setting", setting, "measurement setting EE, EZ, ZE or ZZ; samples the state instead")
        ->check(CLI::IsMember({"EE", "EZ", "ZE", "ZZ"}));
    sim->add_option("--trials", trials, "trials for --setting");
    sim->add_option("--substream", substream, "independent RNG substream for --setting");
    sim->add_option("--out", sim_out, "time-tag file")->required();
    sim->add_flag("--csv", sim_csv, "write CSV instead of binary");
    add_config_flags(sim, common, keys);

    // jti
    auto* jti = app.add_subcommand("jti", "Joint temporal intensity histogram and fits");
    std::string jti_tags, jti_out, jti_hist, jti_profiles;
    fbent_jti_options jopt{};
    jti->add_option("--tags", jti_tags, "time-tag file")->required();
    jti->add_option("--bin-width,--bin_width", jopt.bin_width, "s");
    jti->add_option("--window", jopt.window, "coincidence half-width, s");
    jti->add_option("--band", jopt.band, "diagonal band half-width, s");
    jti->add_option("--fold-beats,--fold_beats", jopt.fold_beats, "fold period in beat periods");
    jti->add_option("--out", jti_out, "JSON report")->required();
    jti->add_option("--histogram", jti_hist, "binary histogram output");
    jti->add_option("--profiles", jti_profiles, "prefix for diagonal/antidiagonal CSVs");
    add_config_flags(jti, common, keys);

    // certify
    auto* cert = app.add_subcommand("certify", "CHSH scan, steering and entropic certificates");
    std::string cert_tags, cert_zz, cert_out;
    std::vector<double> zz_counts;
    fbent_certify_options copt;
    fbent_certify_defaults(&copt);
    bool no_subtract = false, no_eff = false, slot_bias = false;
    cert->add_option("--tags", cert_tags, "equatorial time tags")->required();
    cert->add_option("--zz-tags,--zz_tags", cert_zz, "Z-basis time tags");
    cert->add_option("--zz-counts,--zz_counts", zz_counts, "four ZZ counts, signal-major")->expected(4);
    cert->add_option("--band", copt.band, "s");
    cert->add_option("--slot-width,--slot_width", copt.slot_width, "s");
    cert->add_option("--window", copt.window, "s");
    cert->add_option("--bootstrap", copt.bootstrap, "resamples");
    cert->add_option("--bootstrap-seed", copt.seed, "bootstrap seed");
    cert->add_flag("--no-subtract", no_subtract, "skip accidental subtraction");
    cert->add_flag("--no-efficiency", no_eff, "skip the per-cell envelope correction");
    cert->add_flag("--slot-bias-correction", slot_bias, "undo the finite-slot sinc^2 factor");
    cert->add_option("--out", cert_out, "JSON report")->required();
    add_config_flags(cert, common, keys);

    // tomo
    auto* tomo = app.add_subcommand("tomo", "Maximum-likelihood state tomography");
    std::vector<std::string> tomo_tags;
    std::string tomo_counts, tomo_out, tomo_table_out;
    fbent_tomo_options topt{};
    topt.seed = 1;
    tomo->add_option("--tags", tomo_tags, "four time-tag files in the order EE EZ ZE ZZ")->expected(4);
    tomo->add_option("--counts", tomo_counts, "count table JSON");
    tomo->add_option("--count-table-out", tomo_table_out, "write the count table built from --tags");
    tomo->add_option("--band", topt.band, "s");
    tomo->add_option("--window", topt.window, "s");
    tomo->add_option("--slots", topt.slots, "phase slots per arm");
    tomo->add_option("--bootstrap", topt.bootstrap, "parametric resamples");
    tomo->add_option("--bootstrap-seed", topt.seed, "bootstrap seed");
    tomo->add_option("--max-iterations", topt.max_iterations);
    tomo->add_option("--out", tomo_out, "JSON result")->required();
    add_config_flags(tomo, common, keys);

    // qkd
    auto* qkd = app.add_subcommand("qkd", "Asymptotic key rate");
    std::string qkd_in, qkd_out;
    std::optional<double> q_xx, q_yx, q_zz;
    double q = 0.5, f = 1.1, rate = 1.0;
    qkd->add_option("--correlators", qkd_in, "certify report or {XX, YX, ZZ} JSON; YX defaults to 0");
    qkd->add_option("--xx", q_xx);
    qkd->add_option("--yx", q_yx, "defaults to 0");
    qkd->add_option("--zz", q_zz);
    qkd->add_option("--q", q, "sifting factor");
    qkd->add_option("--f", f, "error-correction inefficiency");
    qkd->add_option("--rate,--R", rate, "coincidence rate, 1/s");
    qkd->add_option("--out", qkd_out, "JSON report")->required();
    add_config_flags(qkd, common, keys);

    // fwi
    auto* fwi = app.add_subcommand("fwi", "Field-widened interferometer design");
    fbent_fwi_options fopt{};
    fopt.long_air = -1.0;
    bool solve = false;
    std::string fwi_out, fwi_sweep, fwi_design_out;
    fwi->add_flag("--solve", solve, "solve glass and short arm for field widening");
    fwi->add_option("--n-glass,--n_glass", fopt.n_glass);
    fwi->add_option("--delta-L,--delta_L", fopt.delta_L, "target opd, m");
    fwi->add_option("--long-air,--long_air", fopt.long_air, "long-arm air, single pass, m");
    fwi->add_option("--alpha-max,--alpha_max", fopt.alpha_max, "sweep end, rad");
    fwi->add_option("--sweep-points", fopt.sweep_points);
    fwi->add_option("--alpha-spread,--alpha_spread", fopt.alpha_spread, "angle spread for the visibility, rad");
    fwi->add_option("--out", fwi_out, "design JSON")->required();
    fwi->add_option("--sweep", fwi_sweep, "angle-sweep CSV");
    fwi->add_option("--design-out", fwi_design_out, "design as a config file");
    add_config_flags(fwi, common, keys);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << Json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }

    std::string subcommand = app.get_subcommands().front()->get_name();
    try {
        ConfigPtr cfg = make_config(common);
        if (!common.config_path.empty())
            common.inputs.push_back(common.config_path);

        if (subcommand == "simulate") {
            fbent_stream* s = nullptr;
            if (setting.empty()) {
                check(fbent_simulate(cfg.get(), n_pairs, &s));
            } else {
                if (trials == 0)
                    trials = n_pairs;
                check(fbent_simulate_setting(cfg.get(), parse_basis(setting[0]), parse_basis(setting[1]), trials,
                                             substream, &s));
            }
            StreamPtr stream(s);
            check(fbent_stream_write(stream.get(), sim_out.c_str(), sim_csv ? 1 : 0));
            common.outputs.push_back(sim_out);
        } else if (subcommand == "jti") {
            StreamPtr tags = read_stream(jti_tags);
            common.inputs.push_back(jti_tags);
            char* json = nullptr;
            check(fbent_jti(cfg.get(), tags.get(), &jopt, jti_hist.empty() ? nullptr : jti_hist.c_str(),
                            jti_profiles.empty() ? nullptr : jti_profiles.c_str(), &json));
            write_text(jti_out, take(json) + "\n");
            common.outputs.push_back(jti_out);
            if (!jti_hist.empty())
                common.outputs.push_back(jti_hist);
            if (!jti_profiles.empty()) {
                common.outputs.push_back(jti_profiles + "_diagonal.csv");
                common.outputs.push_back(jti_profiles + "_antidiagonal.csv");
            }
        } else if (subcommand == "certify") {
            copt.subtract_background = no_subtract ? 0 : 1;
            copt.efficiency_correction = no_eff ? 0 : 1;
            copt.slot_bias_correction = slot_bias ? 1 : 0;
            StreamPtr eq = read_stream(cert_tags);
            common.inputs.push_back(cert_tags);
            StreamPtr zz;
            if (!cert_zz.empty()) {
                zz = read_stream(cert_zz);
                common.inputs.push_back(cert_zz);
            } else if (zz_counts.size() == 4) {
                for (int k = 0; k < 4; ++k)
                    copt.zz_counts[k] = zz_counts[static_cast<std::size_t>(k)];
            } else {
                throw Failure{2, "argument", "certify needs --zz-tags or --zz-counts"};
            }
            char* json = nullptr;
            check(fbent_certify(cfg.get(), eq.get(), zz.get(), &copt, &json));
            write_text(cert_out, take(json) + "\n");
            common.outputs.push_back(cert_out);
        } else if (subcommand == "tomo") {
            std::string table;
            if (!tomo_tags.empty()) {
                std::vector<StreamPtr> streams;
                const fbent_stream* raw[4] = {};
                for (std::size_t k = 0; k < 4; ++k) {
                    streams.push_back(read_stream(tomo_tags[k]));
                    raw[k] = streams.back().get();
                    common.inputs.push_back(tomo_tags[k]);
                }
                char* json = nullptr;
                check(fbent_tomo_count_table(cfg.get(), raw, &topt, &json));
                table = take(json);
                if (!tomo_table_out.empty()) {
                    write_text(tomo_table_out, table + "\n");
                    common.outputs.push_back(tomo_table_out);
                }
            } else if (!tomo_counts.empty()) {
                table = read_text(tomo_counts);
                common.inputs.push_back(tomo_counts);
            } else {
                throw Failure{2, "argument", "tomo needs --tags or --counts"};
            }
            char* json = nullptr;
            const fbent_status st = fbent_tomo_reconstruct(cfg.get(), table.c_str(), &topt, &json);
            if (json) {
                write_text(tomo_out, take(json) + "\n");
                common.outputs.push_back(tomo_out);
            }
            if (st == FBENT_ERR_NONCONVERGED)
                write_manifest(subcommand, common, cfg.get());
            check(st);
        } else if (subcommand == "qkd") {
            double xx = 0, yx = 0, zz = 0;
            if (!qkd_in.empty()) {
                const Json j = parse_json_file(qkd_in);
                common.inputs.push_back(qkd_in);
                xx = correlator_value(j, "XX");
                // a certify report has no YX; its XX is read at the fringe maximum, so YX ~ 0 there
                const bool has_yx = j.contains("YX") || (j.contains("correlators") && j["correlators"].contains("YX"));
                yx = has_yx ? correlator_value(j, "YX") : 0.0;
                zz = correlator_value(j, "ZZ");
            }
            if (q_xx)
                xx = *q_xx;
            if (q_yx)
                yx = *q_yx;
            if (q_zz)
                zz = *q_zz;
            if (qkd_in.empty() && !(q_xx && q_zz))
                throw Failure{2, "argument", "qkd needs --correlators or both --xx and --zz"};
            char* json = nullptr;
            check(fbent_qkd(xx, yx, zz, q, f, rate, &json));
            write_text(qkd_out, take(json) + "\n");
            common.outputs.push_back(qkd_out);
        } else if (subcommand == "fwi") {
            fopt.solve = solve ? 1 : 0;
            char* json = nullptr;
            check(fbent_fwi(cfg.get(), &fopt, fwi_sweep.empty() ? nullptr : fwi_sweep.c_str(), &json));
            const std::string text = take(json);
            write_text(fwi_out, text + "\n");
            common.outputs.push_back(fwi_out);
            if (!fwi_sweep.empty())
                common.outputs.push_back(fwi_sweep);
            if (!fwi_design_out.empty()) {
                const Json d = Json::parse(text)["design"];
                auto arm = [](const Json& segs) {
                    std::string s;
                    for (const auto& seg : segs) {
                        if (!s.empty())
                            s += ", ";
                        std::ostringstream os;
                        os.precision(17);
                        os << seg["length"].get<double>() << ':' << seg["index"].get<double>();
                        s += os.str();
                    }
                    return s;
                };
                check(fbent_config_set(cfg.get(), "long_arm", arm(d["long_arm"]).c_str()));
                check(fbent_config_set(cfg.get(), "short_arm", arm(d["short_arm"]).c_str()));
                char* cfg_text = nullptr;
                check(fbent_config_to_text(cfg.get(), &cfg_text));
                write_text(fwi_design_out, take(cfg_text));
                common.outputs.push_back(fwi_design_out);
            }
        }
        write_manifest(subcommand, common, cfg.get());
    } catch (const Failure& e) {
        std::cerr << Json{{"error", {{"subcommand", subcommand}, {"kind", e.kind}, {"message", e.message}}}}.dump()
                  << '\n';
        return e.exit_code;
    }
    return 0;
}
