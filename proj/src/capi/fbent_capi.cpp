#include "fbent/fbent.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "fbent/analysis.hpp"
#include "fbent/coincidence.hpp"
#include "fbent/config.hpp"
#include "fbent/error.hpp"
#include "fbent/fwi.hpp"
#include "fbent/pipeline.hpp"
#include "fbent/report.hpp"
#include "fbent/timetag_io.hpp"
#include "fbent/tomography.hpp"

struct fbent_config {
    fbent::RunConfig cfg;
};

struct fbent_stream {
    fbent::TimeTagStream tags;
};

namespace {

thread_local std::string g_last_error;

fbent_status fail(fbent_status code, const std::string& message)
{
    g_last_error = message;
    return code;
}

// Runs `body`, mapping exceptions onto status codes.
template <class F>
fbent_status guarded(F&& body)
{
    try {
        g_last_error.clear();
        return body();
    } catch (const fbent::ConfigError& e) {
        return fail(FBENT_ERR_CONFIG, e.what());
    } catch (const fbent::DataError& e) {
        return fail(FBENT_ERR_DATA, e.what());
    } catch (const fbent::ConvergenceError& e) {
        return fail(FBENT_ERR_NONCONVERGED, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(FBENT_ERR_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(FBENT_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(FBENT_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(FBENT_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

#define FBENT_REQUIRE(cond, what)                                                                  \
    do {                                                                                           \
        if (!(cond))                                                                               \
            return fail(FBENT_ERR_ARGUMENT, what);                                                 \
    } while (0)

double or_default(double v, double d)
{
    return v > 0.0 ? v : d;
}

std::vector<fbent::TimePair> equatorial_pairs(const fbent::TimeTagStream& tags, double window)
{
    std::vector<fbent::TimePair> out;
    for (const auto& c : fbent::find_coincidences(tags, window))
        if (c.ch_s == fbent::kSignalTimeResolved && c.ch_i == fbent::kIdlerTimeResolved)
            out.push_back({c.ts, c.ti});
    return out;
}

fbent::TomographyModel tomo_model(const fbent::RunConfig& cfg, const fbent_tomo_options* opt)
{
    fbent::TomographyModel m;
    m.delta_omega = cfg.source.delta_omega;
    m.gamma = cfg.source.gamma;
    m.channels = cfg.channels;
    if (opt) {
        m.band = or_default(opt->band, m.band);
        if (opt->slots > 0)
            m.slots = opt->slots;
    }
    return m;
}

} // namespace

extern "C" {

const char* fbent_last_error(void)
{
    return g_last_error.c_str();
}

void fbent_free_string(char* s)
{
    std::free(s);
}

const char* fbent_version(void)
{
    return "0.3.0";
}

void fbent_set_warning_callback(fbent_warning_fn fn, void* user)
{
    if (!fn) {
        fbent::set_warning_handler(nullptr);
        return;
    }
    fbent::set_warning_handler([fn, user](std::string_view msg) { fn(std::string(msg).c_str(), user); });
}

fbent_status fbent_config_create(fbent_config** out)
{
    FBENT_REQUIRE(out, "out must not be NULL");
    return guarded([&] {
        *out = new fbent_config{};
        return FBENT_OK;
    });
}

fbent_status fbent_config_load(const char* path, fbent_config** out)
{
    FBENT_REQUIRE(path && out, "path and out must not be NULL");
    return guarded([&] {
        std::ifstream is(path);
        if (!is)
            return fail(FBENT_ERR_IO, std::string("cannot open config ") + path);
        auto cfg = std::make_unique<fbent_config>();
        cfg->cfg = fbent::parse_config(is);
        *out = cfg.release();
        return FBENT_OK;
    });
}

fbent_status fbent_config_parse(const char* text, fbent_config** out)
{
    FBENT_REQUIRE(text && out, "text and out must not be NULL");
    return guarded([&] {
        std::istringstream is(text);
        auto cfg = std::make_unique<fbent_config>();
        cfg->cfg = fbent::parse_config(is);
        *out = cfg.release();
        return FBENT_OK;
    });
}

fbent_status fbent_config_set(fbent_config* cfg, const char* key, const char* value)
{
    FBENT_REQUIRE(cfg && key && value, "arguments must not be NULL");
    return guarded([&] {
        fbent::RunConfig copy = cfg->cfg;
        fbent::set_config_value(copy, key, value);
        cfg->cfg = copy;
        return FBENT_OK;
    });
}

fbent_status fbent_config_get(const fbent_config* cfg, const char* key, char** value)
{
    FBENT_REQUIRE(cfg && key && value, "arguments must not be NULL");
    return guarded([&] {
        *value = dup_string(fbent::get_config_value(cfg->cfg, key));
        return FBENT_OK;
    });
}

fbent_status fbent_config_to_text(const fbent_config* cfg, char** text)
{
    FBENT_REQUIRE(cfg && text, "arguments must not be NULL");
    return guarded([&] {
        *text = dup_string(fbent::to_text(cfg->cfg));
        return FBENT_OK;
    });
}

fbent_status fbent_config_validate(const fbent_config* cfg)
{
    FBENT_REQUIRE(cfg, "cfg must not be NULL");
    return guarded([&] {
        fbent::validate(cfg->cfg);
        return FBENT_OK;
    });
}

void fbent_config_destroy(fbent_config* cfg)
{
    delete cfg;
}

fbent_status fbent_simulate(const fbent_config* cfg, uint64_t n_pairs, fbent_stream** out)
{
    FBENT_REQUIRE(cfg && out, "arguments must not be NULL");
    return guarded([&] {
        auto s = std::make_unique<fbent_stream>();
        s->tags = fbent::simulate_stream(cfg->cfg, n_pairs);
        *out = s.release();
        return FBENT_OK;
    });
}

fbent_status fbent_simulate_setting(const fbent_config* cfg, fbent_basis signal, fbent_basis idler,
                                    uint64_t trials, uint64_t substream, fbent_stream** out)
{
    FBENT_REQUIRE(cfg && out, "arguments must not be NULL");
    return guarded([&] {
        const fbent::SettingBases bases{signal == FBENT_Z ? fbent::Basis::Z : fbent::Basis::Equatorial,
                                        idler == FBENT_Z ? fbent::Basis::Z : fbent::Basis::Equatorial};
        auto s = std::make_unique<fbent_stream>();
        s->tags = fbent::simulate_setting_stream(cfg->cfg, bases, trials, substream);
        *out = s.release();
        return FBENT_OK;
    });
}

fbent_status fbent_stream_read(const char* path, fbent_stream** out)
{
    FBENT_REQUIRE(path && out, "arguments must not be NULL");
    return guarded([&] {
        if (!std::ifstream(path, std::ios::binary))
            return fail(FBENT_ERR_IO, std::string("cannot open ") + path);
        auto s = std::make_unique<fbent_stream>();
        s->tags = fbent::read_tags_file(path);
        *out = s.release();
        return FBENT_OK;
    });
}

fbent_status fbent_stream_write(const fbent_stream* s, const char* path, int csv)
{
    FBENT_REQUIRE(s && path, "arguments must not be NULL");
    return guarded([&] {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            return fail(FBENT_ERR_IO, std::string("cannot write ") + path);
        if (csv)
            fbent::write_tags_csv(os, s->tags);
        else
            fbent::write_tags_binary(os, s->tags);
        return FBENT_OK;
    });
}

size_t fbent_stream_size(const fbent_stream* s)
{
    return s ? s->tags.records.size() : 0;
}

fbent_status fbent_stream_record(const fbent_stream* s, size_t index, uint8_t* channel, uint64_t* timestamp_ps)
{
    FBENT_REQUIRE(s && channel && timestamp_ps, "arguments must not be NULL");
    if (index >= s->tags.records.size())
        return fail(FBENT_ERR_ARGUMENT, "record index out of range");
    *channel = s->tags.records[index].channel;
    *timestamp_ps = s->tags.records[index].timestamp_ps;
    g_last_error.clear();
    return FBENT_OK;
}

void fbent_stream_destroy(fbent_stream* s)
{
    delete s;
}

fbent_status fbent_jti(const fbent_config* cfg, const fbent_stream* tags, const fbent_jti_options* opt,
                       const char* histogram_path, const char* profiles_prefix, char** json)
{
    FBENT_REQUIRE(cfg && tags && json, "arguments must not be NULL");
    return guarded([&] {
        fbent::JtiOptions o;
        if (opt) {
            o.bin_width = or_default(opt->bin_width, o.bin_width);
            o.window = or_default(opt->window, o.window);
            o.band = or_default(opt->band, o.band);
            if (opt->fold_beats > 0)
                o.fold_beats = opt->fold_beats;
        }
        const auto pairs = equatorial_pairs(tags->tags, o.window);
        const fbent::JtiAnalysis a = fbent::analyze_jti(pairs, cfg->cfg.source.delta_omega, o);
        if (histogram_path) {
            std::ofstream os(histogram_path, std::ios::binary);
            if (!os)
                return fail(FBENT_ERR_IO, std::string("cannot write ") + histogram_path);
            fbent::write_histogram_binary(os, a.frame);
        }
        if (profiles_prefix) {
            const std::string p(profiles_prefix);
            std::ofstream d(p + "_diagonal.csv"), ad(p + "_antidiagonal.csv");
            if (!d || !ad)
                return fail(FBENT_ERR_IO, "cannot write profile CSVs with prefix " + p);
            fbent::write_profile_csv(d, a.diagonal, "tau_plus_s");
            fbent::write_profile_csv(ad, a.antidiagonal, "tau_minus_s");
        }
        fbent::Json j = {{"coincidences", a.coincidences},
                         {"bin_width", o.bin_width},
                         {"band", o.band},
                         {"fold_period", o.fold_beats * std::numbers::pi / cfg->cfg.source.delta_omega},
                         {"visibility", fbent::to_json(a.fringe.visibility)},
                         {"theta", a.fringe.theta},
                         {"theta_stderr", a.fringe.theta_std_error},
                         {"ringdown", fbent::to_json(a.ringdown)},
                         {"histogram", {{"n_s", a.frame.n_s}, {"n_i", a.frame.n_i}, {"t0_s", a.frame.t0_s}, {"t0_i", a.frame.t0_i}}}};
        *json = dup_string(j.dump(2));
        return FBENT_OK;
    });
}

void fbent_certify_defaults(fbent_certify_options* opt)
{
    if (!opt)
        return;
    *opt = fbent_certify_options{};
    opt->band = fbent::kDefaultDiagonalBand;
    opt->window = fbent::kDefaultCoincidenceWindow;
    opt->subtract_background = 1;
    opt->efficiency_correction = 1;
    opt->bootstrap = 1000;
    opt->seed = 1;
}

fbent_status fbent_certify(const fbent_config* cfg, const fbent_stream* equatorial, const fbent_stream* zz,
                           const fbent_certify_options* opt, char** json)
{
    FBENT_REQUIRE(cfg && equatorial && json, "arguments must not be NULL");
    return guarded([&] {
        fbent_certify_options o;
        fbent_certify_defaults(&o);
        if (opt)
            o = *opt;
        const auto& rc = cfg->cfg;
        const double window = or_default(o.window, fbent::kDefaultCoincidenceWindow);
        const auto pairs = equatorial_pairs(equatorial->tags, window);

        fbent::CertificationInputs in;
        in.equatorial = pairs;
        in.delta_omega = rc.source.delta_omega;
        in.chsh.band = or_default(o.band, fbent::kDefaultDiagonalBand);
        in.chsh.slot_width = o.slot_width;
        in.chsh.gamma = o.efficiency_correction ? rc.source.gamma : 0.0;
        in.chsh.subtract_background = o.subtract_background != 0;
        in.chsh.sideband_inner = 5.0 / rc.source.gamma;
        in.chsh.sideband_outer = window;
        in.chsh.slot_bias_correction = o.slot_bias_correction != 0;
        in.bootstrap_resamples = o.bootstrap ? o.bootstrap : 1000;
        in.seed = o.seed;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                in.zz_efficiency[a][b] = rc.channels.port_efficiency(true, a) * rc.channels.port_efficiency(false, b);
        if (zz) {
            const auto co = fbent::find_coincidences(zz->tags, window);
            const auto pc = fbent::port_counts(co, in.chsh.band);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    in.zz_counts[a][b] = static_cast<double>(pc[a][b]);
        } else {
            for (int k = 0; k < 4; ++k)
                in.zz_counts[k / 2][k % 2] = o.zz_counts[k];
        }
        const fbent::CertificationReport rep = fbent::certify(in);
        fbent::Json j = fbent::to_json(rep);
        j["settings"] = {{"band", in.chsh.band},
                         {"slot_width", in.chsh.slot_width > 0 ? in.chsh.slot_width : fbent::default_slot_width(in.delta_omega)},
                         {"subtract_background", in.chsh.subtract_background},
                         {"efficiency_correction", in.chsh.gamma > 0.0},
                         {"slot_bias_correction", in.chsh.slot_bias_correction},
                         {"coincidences", pairs.size()}};
        *json = dup_string(j.dump(2));
        return FBENT_OK;
    });
}

fbent_status fbent_tomo_count_table(const fbent_config* cfg, const fbent_stream* const streams[4],
                                    const fbent_tomo_options* opt, char** json)
{
    FBENT_REQUIRE(cfg && streams && json, "arguments must not be NULL");
    return guarded([&] {
        const fbent::TomographyModel model = tomo_model(cfg->cfg, opt);
        const double window = or_default(opt ? opt->window : 0.0, fbent::kDefaultCoincidenceWindow);
        const auto settings = fbent::standard_settings();
        std::vector<fbent::MeasurementSetting> table;
        for (int k = 0; k < 4; ++k) {
            if (!streams[k])
                continue;
            const auto co = fbent::find_coincidences(streams[k]->tags, window);
            table.push_back(fbent::count_setting(co, settings[static_cast<std::size_t>(k)], model));
        }
        fbent::Json j = fbent::settings_to_json(table);
        j["slots"] = model.slots;
        j["band"] = model.band;
        *json = dup_string(j.dump(2));
        return FBENT_OK;
    });
}

fbent_status fbent_tomo_reconstruct(const fbent_config* cfg, const char* count_table_json,
                                    const fbent_tomo_options* opt, char** json)
{
    FBENT_REQUIRE(cfg && count_table_json && json, "arguments must not be NULL");
    return guarded([&] {
        fbent::Json table;
        try {
            table = fbent::Json::parse(count_table_json);
        } catch (const fbent::Json::exception& e) {
            throw fbent::DataError(std::string("count table: ") + e.what());
        }
        fbent_tomo_options o{};
        if (opt)
            o = *opt;
        if (o.slots <= 0 && table.contains("slots") && table["slots"].is_number_integer())
            o.slots = table["slots"].get<int>();
        if (o.band <= 0.0 && table.contains("band") && table["band"].is_number())
            o.band = table["band"].get<double>();
        const fbent::TomographyModel model = tomo_model(cfg->cfg, &o);
        const auto settings = fbent::settings_from_json(table);
        fbent::ProjectorSetInfo info;
        const auto elements = fbent::build_projector_set(settings, model, &info);
        fbent::MleOptions mo;
        if (o.max_iterations > 0)
            mo.max_iterations = o.max_iterations;
        const fbent::TomographyResult res = fbent::mle_reconstruct(elements, mo);
        fbent::Json j = fbent::to_json(res);
        j["projectors"] = {{"count", elements.size()}, {"gram_rank", info.rank}, {"condition_number", info.condition_number}};
        if (o.bootstrap > 0) {
            const auto u = fbent::uncertainty(elements, res, o.bootstrap, o.seed ? o.seed : 1);
            j["uncertainty"] = {{"fidelity_stderr", u.fidelity_std}, {"purity_stderr", u.purity_std}, {"resamples", u.resamples}};
        }
        *json = dup_string(j.dump(2));
        if (!res.converged)
            return fail(FBENT_ERR_NONCONVERGED, "tomography: optimizer stopped after " + std::to_string(res.iterations) +
                                                    " iterations, gradient norm " + std::to_string(res.gradient_norm));
        return FBENT_OK;
    });
}

fbent_status fbent_qkd(double xx, double yx, double zz, double q, double f, double r, char** json)
{
    FBENT_REQUIRE(json, "json must not be NULL");
    return guarded([&] {
        *json = dup_string(fbent::to_json(fbent::qkd_report(xx, yx, zz, q, f, r)).dump(2));
        return FBENT_OK;
    });
}

fbent_status fbent_fwi(const fbent_config* cfg, const fbent_fwi_options* opt, const char* sweep_csv_path, char** json)
{
    FBENT_REQUIRE(cfg && json, "arguments must not be NULL");
    return guarded([&] {
        fbent_fwi_options o{};
        o.long_air = -1.0;
        if (opt)
            o = *opt;
        const auto& rc = cfg->cfg;
        fbent::FwiDesign design = rc.fwi;
        if (o.solve) {
            const double n = or_default(o.n_glass, 1.5007);
            const double dl = or_default(o.delta_L, fbent::demux_length(rc.source.delta_omega));
            fbent::AirGaps gaps;
            if (o.long_air >= 0.0)
                gaps.long_arm = o.long_air;
            design = fbent::solve_widened(n, gaps, dl, rc.fwi.double_pass);
        }
        const double dl0 = fbent::opd(design, 0.0);
        const auto dd = fbent::demux_delay(dl0);
        const double v = fbent::demux_visibility(design, rc.source.gamma, dd.bin_spacing, o.alpha_spread);
        fbent::Json j = {{"design", fbent::to_json(design)},
                         {"opd", dl0},
                         {"delay", dd.delay},
                         {"bin_spacing", dd.bin_spacing},
                         {"bin_spacing_hz", dd.bin_spacing / (2.0 * std::numbers::pi)},
                         {"alpha_spread", o.alpha_spread},
                         {"demux_visibility", v}};
        if (sweep_csv_path) {
            std::ofstream os(sweep_csv_path);
            if (!os)
                return fail(FBENT_ERR_IO, std::string("cannot write ") + sweep_csv_path);
            const double amax = or_default(o.alpha_max, 0.05);
            const int npts = o.sweep_points > 1 ? o.sweep_points : 11;
            os << "alpha_rad,opd_m,visibility\n";
            os.precision(12);
            for (int k = 0; k < npts; ++k) {
                const double a = amax * k / (npts - 1);
                os << a << ',' << fbent::opd(design, a) << ','
                   << fbent::demux_visibility(design, rc.source.gamma, dd.bin_spacing, a) << '\n';
            }
        }
        *json = dup_string(j.dump(2));
        return FBENT_OK;
    });
}

} // extern "C"
