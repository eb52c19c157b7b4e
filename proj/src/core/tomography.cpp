#include "fbent/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "fbent/error.hpp"
#include "fbent/rng.hpp"

namespace fbent {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kGrid = 48; // quadrature points per slot edge for the equatorial pair integral

double wrap_phase(double x)
{
    return x - kTwoPi * std::round(x / kTwoPi);
}

double sinc(double x)
{
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
}

// (1/P) * integral over the slot of |phi(t)><phi(t)|, phi = dw t.
Matrix2 slot_average(int k, const TomographyModel& m)
{
    const double w = m.effective_slot_width();
    const double phi = kTwoPi * k / m.slots;
    const double s = sinc(0.5 * m.delta_omega * w);
    Matrix2 out;
    out << 0.5, 0.5 * s * std::polar(1.0, -phi), 0.5 * s * std::polar(1.0, phi), 0.5;
    return out * (w / m.period());
}

Matrix2 z_projector(int j)
{
    Matrix2 out = Matrix2::Zero();
    out(j, j) = 1.0;
    return out;
}

// Slot index of a phase, or -1 inside a gap between slots.
int slot_of(double t, const TomographyModel& m)
{
    const double period = m.period();
    const double phase = m.delta_omega * (t - period * std::floor(t / period));
    const double pitch = kTwoPi / m.slots;
    const long k = std::lround(phase / pitch);
    const double d = wrap_phase(phase - static_cast<double>(k) * pitch);
    if (std::abs(d) > 0.5 * m.delta_omega * m.effective_slot_width() + 1e-12)
        return -1;
    return static_cast<int>(((k % m.slots) + m.slots) % m.slots);
}

double band_mass(const TomographyModel& m)
{
    return 1.0 - std::exp(-m.gamma * m.band);
}

std::string setting_code(SettingBases b)
{
    std::string s;
    s += b.signal == Basis::Z ? 'Z' : 'E';
    s += b.idler == Basis::Z ? 'Z' : 'E';
    return s;
}

// Operators of the equatorial-equatorial setting: [k * slots + l].
std::vector<Matrix4> equatorial_pair_operators(const TomographyModel& m)
{
    const int n = m.slots;
    const double period = m.period();
    const double w = m.effective_slot_width();
    const double h = w / kGrid;
    const int reach = static_cast<int>(std::ceil((m.band + w) / period)) + 1;
    std::vector<Matrix4> ops(static_cast<std::size_t>(n * n), Matrix4::Zero());
    std::vector<Complex> es(kGrid), ei(kGrid);
    for (int k = 0; k < n; ++k) {
        const double cs = period * k / n;
        for (int a = 0; a < kGrid; ++a)
            es[a] = std::polar(1.0, m.delta_omega * (cs - 0.5 * w + (a + 0.5) * h));
        for (int l = 0; l < n; ++l) {
            const double ci0 = period * l / n;
            for (int r = -reach; r <= reach; ++r) {
                const double ci = ci0 + r * period;
                if (std::abs(cs - ci) > m.band + w)
                    continue;
                for (int b = 0; b < kGrid; ++b)
                    ei[b] = std::polar(1.0, m.delta_omega * (ci - 0.5 * w + (b + 0.5) * h));
                Matrix4 acc = Matrix4::Zero();
                for (int a = 0; a < kGrid; ++a) {
                    const double ts = cs - 0.5 * w + (a + 0.5) * h;
                    for (int b = 0; b < kGrid; ++b) {
                        const double ti = ci - 0.5 * w + (b + 0.5) * h;
                        const double u = std::abs(ts - ti);
                        if (u > m.band)
                            continue;
                        const double weight = 0.5 * m.gamma * std::exp(-m.gamma * u);
                        Ket4 v(1.0, ei[b], es[a], es[a] * ei[b]);
                        acc += weight * (v * v.adjoint());
                    }
                }
                // |phi_s phi_i><..| carries 1/4 from the normalized kets.
                ops[static_cast<std::size_t>(k * n + l)] += acc * (0.25 * h * h / period);
            }
        }
    }
    return ops;
}

std::vector<Matrix4> setting_operators(SettingBases bases, const TomographyModel& m,
                                       const std::vector<Matrix4>* ee_cache)
{
    const ChannelModel& ch = m.channels;
    const double mass = band_mass(m);
    const int ns = bases.signal == Basis::Z ? 2 : m.slots;
    const int ni = bases.idler == Basis::Z ? 2 : m.slots;
    std::vector<Matrix4> ops;
    ops.reserve(static_cast<std::size_t>(ns * ni));
    if (bases.signal == Basis::Equatorial && bases.idler == Basis::Equatorial) {
        const std::vector<Matrix4> ee = ee_cache ? *ee_cache : equatorial_pair_operators(m);
        const double eta = ch.eta_signal_equatorial * ch.eta_idler_equatorial;
        for (const auto& op : ee)
            ops.push_back(op * eta);
        return ops;
    }
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ni; ++b) {
            Matrix2 s, i;
            if (bases.signal == Basis::Z)
                s = z_projector(a) * (0.5 * ch.port_efficiency(true, a));
            else
                s = slot_average(a, m) * ch.eta_signal_equatorial;
            if (bases.idler == Basis::Z)
                i = z_projector(b) * (0.5 * ch.port_efficiency(false, b));
            else
                i = slot_average(b, m) * ch.eta_idler_equatorial;
            ops.push_back(kron(s, i) * mass);
        }
    return ops;
}

// Real Pauli-basis coordinates Tr(M sigma_a x sigma_b).
Eigen::Matrix<double, 16, 1> pauli_coordinates(const Matrix4& op)
{
    Eigen::Matrix<double, 16, 1> v;
    const Pauli ps[4] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            v(4 * a + b) = (op * kron(pauli(ps[a]), pauli(ps[b]))).trace().real();
    return v;
}

const char* kPauliNames = "IXYZ";

} // namespace

void TomographyModel::validate() const
{
    if (!(delta_omega > 0.0) || !(gamma > 0.0) || !(band > 0.0))
        throw ConfigError("tomography: delta_omega, gamma and band must be positive");
    if (slots < 2)
        throw ConfigError("tomography: need at least 2 phase slots per arm");
    if (slot_width < 0.0 || slot_width > period() / slots * (1.0 + 1e-12))
        throw ConfigError("tomography: slot width must be in (0, period/slots]");
    channels.validate();
}

double TomographyModel::period() const
{
    return kTwoPi / delta_omega;
}

double TomographyModel::effective_slot_width() const
{
    return slot_width > 0.0 ? slot_width : period() / slots;
}

std::size_t TomographyModel::outcome_count(SettingBases bases) const
{
    const std::size_t ns = bases.signal == Basis::Z ? 2 : static_cast<std::size_t>(slots);
    const std::size_t ni = bases.idler == Basis::Z ? 2 : static_cast<std::size_t>(slots);
    return ns * ni;
}

std::vector<SettingBases> standard_settings()
{
    return {{Basis::Equatorial, Basis::Equatorial},
            {Basis::Equatorial, Basis::Z},
            {Basis::Z, Basis::Equatorial},
            {Basis::Z, Basis::Z}};
}

std::vector<TomoElement> build_projector_set(std::span<const MeasurementSetting> settings,
                                             const TomographyModel& model, ProjectorSetInfo* info)
{
    model.validate();
    std::vector<Matrix4> ee_cache;
    bool have_ee = false;
    std::vector<TomoElement> out;
    for (const auto& st : settings) {
        const std::size_t expect = model.outcome_count(st.bases);
        if (st.counts.size() != expect) {
            std::ostringstream os;
            os << "tomography: setting " << setting_code(st.bases) << " has " << st.counts.size()
               << " counts, expected " << expect;
            throw DataError(os.str());
        }
        if (!(st.exposure > 0.0))
            throw DataError("tomography: exposure must be positive");
        for (double c : st.counts)
            if (!(c >= 0.0))
                throw DataError("tomography: counts must be >= 0");
        const bool ee = st.bases.signal == Basis::Equatorial && st.bases.idler == Basis::Equatorial;
        if (ee && !have_ee) {
            ee_cache = equatorial_pair_operators(model);
            have_ee = true;
        }
        const auto ops = setting_operators(st.bases, model, ee ? &ee_cache : nullptr);
        const int ni = st.bases.idler == Basis::Z ? 2 : model.slots;
        for (std::size_t k = 0; k < ops.size(); ++k) {
            std::ostringstream label;
            label << setting_code(st.bases) << '[' << k / ni << ',' << k % ni << ']';
            out.push_back({ops[k] * st.exposure, st.counts[k], label.str()});
        }
    }

    Eigen::MatrixXd coords(static_cast<Eigen::Index>(out.size()), 16);
    for (std::size_t k = 0; k < out.size(); ++k)
        coords.row(static_cast<Eigen::Index>(k)) = pauli_coordinates(out[k].povm).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coords, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > 1e-10 * smax)
            ++rank;
    if (info) {
        info->rank = rank;
        info->condition_number = rank == 16 ? smax / sv(15) : std::numeric_limits<double>::infinity();
    }
    if (rank < 16) {
        std::ostringstream os;
        os << "tomography: projector set is not informationally complete (rank " << rank
           << " of 16); missing directions:";
        const Eigen::MatrixXd& v = svd.matrixV();
        for (int col = rank; col < 16; ++col) {
            os << " {";
            bool first = true;
            for (int r = 0; r < 16; ++r)
                if (std::abs(v(r, col)) > 0.1) {
                    os << (first ? "" : " ") << kPauliNames[r / 4] << kPauliNames[r % 4];
                    first = false;
                }
            os << '}';
        }
        throw DataError(os.str());
    }
    return out;
}

MeasurementSetting count_setting(std::span<const Coincidence> coincidences, SettingBases bases,
                                 const TomographyModel& model)
{
    model.validate();
    MeasurementSetting st;
    st.bases = bases;
    st.counts.assign(model.outcome_count(bases), 0.0);
    const int ni = bases.idler == Basis::Z ? 2 : model.slots;
    for (const auto& c : coincidences) {
        if (std::abs(c.ts - c.ti) > model.band)
            continue;
        int a, b;
        if (bases.signal == Basis::Z)
            a = port_of_channel(c.ch_s);
        else
            a = c.ch_s == kSignalTimeResolved ? slot_of(c.ts, model) : -1;
        if (bases.idler == Basis::Z)
            b = port_of_channel(c.ch_i);
        else
            b = c.ch_i == kIdlerTimeResolved ? slot_of(c.ti, model) : -1;
        if (a < 0 || b < 0)
            continue;
        st.counts[static_cast<std::size_t>(a * ni + b)] += 1.0;
    }
    return st;
}

MeasurementSetting expected_setting(const TwoQubitState& state, SettingBases bases,
                                    const TomographyModel& model, double n_emitted)
{
    model.validate();
    MeasurementSetting st;
    st.bases = bases;
    for (const auto& op : setting_operators(bases, model, nullptr))
        st.counts.push_back(n_emitted * std::max((state.matrix() * op).trace().real(), 0.0));
    return st;
}

namespace {

constexpr int kParams = 16;
using Params = Eigen::Matrix<double, kParams, 1>;

Matrix4 unpack(const Params& x)
{
    Matrix4 t = Matrix4::Zero();
    for (int i = 0; i < 4; ++i)
        t(i, i) = x(i);
    int m = 4;
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < i; ++j) {
            t(i, j) = Complex(x(m), x(m + 1));
            m += 2;
        }
    return t;
}

struct Objective {
    std::span<const TomoElement> elements;
    Matrix4 sum_ops = Matrix4::Zero();
    double total = 0.0;

    explicit Objective(std::span<const TomoElement> e) : elements(e)
    {
        for (const auto& el : e) {
            sum_ops += el.povm;
            total += el.count;
        }
    }

    static Matrix4 rho_of(const Params& x)
    {
        const Matrix4 t = unpack(x);
        const Matrix4 a = t.adjoint() * t;
        return a / a.trace().real();
    }

    // Profiled log-likelihood; -inf outside the support.
    double value(const Params& x) const
    {
        const Matrix4 rho = rho_of(x);
        const double sp = (rho * sum_ops).trace().real();
        if (!(sp > 0.0))
            return -std::numeric_limits<double>::infinity();
        double ll = 0.0;
        for (const auto& el : elements) {
            if (el.count == 0.0)
                continue;
            const double p = (rho * el.povm).trace().real();
            if (!(p > 0.0))
                return -std::numeric_limits<double>::infinity();
            ll += el.count * std::log(p);
        }
        const double n_hat = total / sp;
        return ll + total * std::log(n_hat) - total;
    }

    // value(b) - value(a) summed as log ratios, so it stays accurate when the two
    // likelihoods agree to more digits than a double holds.
    double delta(const Params& a, const Params& b) const
    {
        const Matrix4 ra = rho_of(a), rb = rho_of(b);
        const double spa = (ra * sum_ops).trace().real();
        const double spb = (rb * sum_ops).trace().real();
        if (!(spb > 0.0))
            return -std::numeric_limits<double>::infinity();
        const Matrix4 dr = rb - ra;
        double d = -total * std::log1p((dr * sum_ops).trace().real() / spa);
        for (const auto& el : elements) {
            if (el.count == 0.0)
                continue;
            const double pa = (ra * el.povm).trace().real();
            const double pb = (rb * el.povm).trace().real();
            if (!(pb > 0.0))
                return -std::numeric_limits<double>::infinity();
            d += el.count * std::log1p((dr * el.povm).trace().real() / pa);
        }
        return d;
    }

    Params gradient(const Params& x) const
    {
        const Matrix4 t = unpack(x);
        const Matrix4 a = t.adjoint() * t;
        const double tr = a.trace().real();
        const Matrix4 rho = a / tr;
        const double sp = (rho * sum_ops).trace().real();
        Matrix4 g = -(total / sp) * sum_ops;
        for (const auto& el : elements) {
            if (el.count == 0.0)
                continue;
            const double p = (rho * el.povm).trace().real();
            g += (el.count / p) * el.povm;
        }
        const double grho = (g * rho).trace().real();
        const Matrix4 h = (g - grho * Matrix4::Identity()) / tr;
        const Matrix4 d = t * h;
        Params out;
        for (int i = 0; i < 4; ++i)
            out(i) = 2.0 * d(i, i).real();
        int m = 4;
        for (int i = 1; i < 4; ++i)
            for (int j = 0; j < i; ++j) {
                out(m) = 2.0 * d(i, j).real();
                out(m + 1) = 2.0 * d(i, j).imag();
                m += 2;
            }
        return out;
    }
};

} // namespace

TomographyResult mle_reconstruct(std::span<const TomoElement> elements, const MleOptions& options)
{
    if (elements.empty())
        throw DataError("mle_reconstruct: no projectors");
    Objective obj(elements);
    if (!(obj.total > 0.0))
        throw DataError("mle_reconstruct: total counts must be positive");

    Params x = Params::Zero();
    x.head<4>().setConstant(0.5); // T = I/2, rho = I/4
    double ll = obj.value(x);
    if (!std::isfinite(ll))
        throw DataError("mle_reconstruct: maximally mixed state has zero likelihood for an observed outcome");
    Params g = obj.gradient(x) / obj.total;

    TomographyResult res;
    std::deque<std::pair<Params, Params>> memory; // (s, y) in the minimization convention
    constexpr std::size_t kMemory = 8;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        res.gradient_norm = g.norm();
        if (res.gradient_norm < options.gradient_tolerance) {
            res.converged = true;
            break;
        }
        // Two-loop recursion on f = -ll/total.
        Params q = -g;
        std::vector<double> alphas;
        for (auto itm = memory.rbegin(); itm != memory.rend(); ++itm) {
            const double rho_k = 1.0 / itm->second.dot(itm->first);
            const double al = rho_k * itm->first.dot(q);
            alphas.push_back(al);
            q -= al * itm->second;
        }
        if (!memory.empty()) {
            const auto& last = memory.back();
            q *= last.first.dot(last.second) / last.second.dot(last.second);
        } else {
            q /= std::max(1.0, q.norm());
        }
        std::size_t ai = alphas.size();
        for (const auto& sy : memory) {
            const double rho_k = 1.0 / sy.second.dot(sy.first);
            const double be = rho_k * sy.second.dot(q);
            q += sy.first * (alphas[--ai] - be);
        }
        Params dir = -q; // descent direction for f, ascent for ll
        double slope = g.dot(dir);
        if (!(slope > 0.0)) {
            memory.clear();
            dir = g / std::max(1.0, g.norm());
            slope = g.dot(dir);
        }

        double step = 1.0, ll_new = ll;
        Params x_new = x;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = x + step * dir;
            const double d = obj.delta(x, x_new);
            if (std::isfinite(d) && d / obj.total >= 1e-4 * step * slope) {
                ll_new = ll + d;
                accepted = true;
                break;
            }
            // Rounding floor: if the path still climbs at both ends the step is an ascent
            // for a locally quadratic ll; the trapezoid gives its size.
            if (std::abs(d) <= 1e-13 * obj.total) {
                const double slope_new = obj.gradient(x_new).dot(dir) / obj.total;
                if (slope_new > 0.0) {
                    ll_new = ll + 0.5 * step * (slope + slope_new) * obj.total;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No ascent left at working precision.
            res.converged = res.gradient_norm < 1e-5;
            break;
        }
        if (ll_new < ll)
            throw std::logic_error("mle_reconstruct: log-likelihood decreased on an accepted step");

        const Params g_new = obj.gradient(x_new) / obj.total;
        const Params s = x_new - x;
        const Params y = -(g_new - g);
        if (s.dot(y) > 1e-14 * s.norm() * y.norm()) {
            memory.emplace_back(s, y);
            if (memory.size() > kMemory)
                memory.pop_front();
        }
        const double change = std::abs(ll_new - ll) / std::max(std::abs(ll_new), 1.0);
        x = x_new;
        ll = ll_new;
        g = g_new;
        if (options.record_trace)
            res.trace.push_back(ll);
        // Keep T at unit scale; rho and the likelihood are unchanged.
        const double scale = std::sqrt(unpack(x).squaredNorm());
        if (scale > 0.0 && (scale > 4.0 || scale < 0.25)) {
            x /= scale;
            g *= scale;
            memory.clear();
        }
        if (change < options.relative_tolerance) {
            res.converged = true;
            ++it;
            break;
        }
    }
    res.iterations = it;
    res.gradient_norm = g.norm();

    Matrix4 rho = Objective::rho_of(x);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    res.rho = TwoQubitState::from_matrix(rho);
    res.log_likelihood = ll;
    res.pair_number = obj.total / (rho * obj.sum_ops).trace().real();
    res.purity = purity(res.rho);
    res.fidelity_to_phi_plus = fidelity(res.rho, bell_state(0.0));
    const Complex coh = rho(3, 0);
    res.bell_phase = std::arg(coh);
    res.max_bell_fidelity = 0.5 * (rho(0, 0).real() + rho(3, 3).real()) + std::abs(coh);
    return res;
}

TomographyUncertainty uncertainty(std::span<const TomoElement> elements, const TomographyResult& result,
                                  int n_boot, std::uint64_t seed)
{
    if (n_boot < 2)
        throw std::invalid_argument("uncertainty: need at least 2 resamples");
    Rng rng(seed, 0x70);
    std::vector<TomoElement> sample(elements.begin(), elements.end());
    double sf = 0, sf2 = 0, sp = 0, sp2 = 0;
    int used = 0;
    MleOptions opts;
    for (int b = 0; b < n_boot; ++b) {
        for (std::size_t k = 0; k < sample.size(); ++k) {
            const double mu = result.pair_number * (result.rho.matrix() * elements[k].povm).trace().real();
            sample[k].count = mu > 0.0 ? static_cast<double>(rng.poisson(mu)) : 0.0;
        }
        try {
            const TomographyResult r = mle_reconstruct(sample, opts);
            sf += r.fidelity_to_phi_plus;
            sf2 += r.fidelity_to_phi_plus * r.fidelity_to_phi_plus;
            sp += r.purity;
            sp2 += r.purity * r.purity;
            ++used;
        } catch (const DataError&) {
            // A resample with zero total counts carries no information.
        }
    }
    TomographyUncertainty u;
    u.resamples = used;
    if (used >= 2) {
        auto sd = [used](double s, double s2) {
            const double m = s / used;
            return std::sqrt(std::max(s2 / used - m * m, 0.0) * used / (used - 1.0));
        };
        u.fidelity_std = sd(sf, sf2);
        u.purity_std = sd(sp, sp2);
    }
    return u;
}

} // namespace fbent
