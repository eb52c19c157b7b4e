#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fbent/error.hpp"
#include "fbent/pipeline.hpp"
#include "fbent/tomography.hpp"

using namespace fbent;

namespace {

struct QuietWarnings : ::testing::Environment {
    void SetUp() override { set_warning_handler([](std::string_view) {}); }
};
const auto* const quiet = ::testing::AddGlobalTestEnvironment(new QuietWarnings);

std::vector<MeasurementSetting> exact_settings(const TwoQubitState& s, const TomographyModel& m, double n)
{
    std::vector<MeasurementSetting> out;
    for (auto b : standard_settings())
        out.push_back(expected_setting(s, b, m, n));
    return out;
}

TwoQubitState werner(double p)
{
    return TwoQubitState::from_matrix(p * bell_state(0.0).matrix() + (1 - p) * Matrix4::Identity() / 4.0);
}

} // namespace

TEST(ProjectorSet, StandardSettingsAreComplete)
{
    TomographyModel m;
    ProjectorSetInfo info;
    const auto el = build_projector_set(exact_settings(bell_state(0), m, 1e6), m, &info);
    EXPECT_EQ(info.rank, 16);
    EXPECT_TRUE(std::isfinite(info.condition_number));
    EXPECT_EQ(el.size(), 64u + 16u + 16u + 4u);
    for (const auto& e : el) {
        EXPECT_LT((e.povm - e.povm.adjoint()).norm(), 1e-12);
        EXPECT_GE(min_eigenvalue(e.povm), -1e-12);
    }
}

TEST(ProjectorSet, MissingSettingsNameDirections)
{
    TomographyModel m;
    auto all = exact_settings(bell_state(0), m, 1e6);
    const std::vector<MeasurementSetting> only_ee_zz{all[0], all[3]};
    try {
        build_projector_set(only_ee_zz, m);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("not informationally complete"), std::string::npos);
        EXPECT_NE(msg.find("Z"), std::string::npos) << msg; // the mixed XZ/ZX-type directions
    }
}

TEST(ProjectorSet, RejectsMalformedCounts)
{
    TomographyModel m;
    auto s = exact_settings(bell_state(0), m, 1e6);
    s[1].counts.pop_back();
    EXPECT_THROW(build_projector_set(s, m), DataError);
    s = exact_settings(bell_state(0), m, 1e6);
    s[2].counts[0] = -1;
    EXPECT_THROW(build_projector_set(s, m), DataError);
}

TEST(Mle, NoiselessPhiPlus)
{
    TomographyModel m;
    const auto el = build_projector_set(exact_settings(bell_state(0), m, 1e6), m);
    const auto r = mle_reconstruct(el);
    EXPECT_TRUE(r.converged);
    EXPECT_GE(r.fidelity_to_phi_plus, 0.9999);
    EXPECT_GE(r.purity, 0.9999);
    EXPECT_LT(r.iterations, 10000);
}

TEST(Mle, MaximallyMixed)
{
    TomographyModel m;
    const auto el = build_projector_set(exact_settings(TwoQubitState::maximally_mixed(), m, 1e6), m);
    const auto r = mle_reconstruct(el);
    EXPECT_NEAR(r.purity, 0.25, 0.01);
}

TEST(Mle, WernerState)
{
    TomographyModel m;
    const auto el = build_projector_set(exact_settings(werner(0.9), m, 1e7), m);
    const auto r = mle_reconstruct(el);
    EXPECT_NEAR(r.fidelity_to_phi_plus, 0.9 + 0.1 / 4, 1e-4);
    EXPECT_NEAR(r.purity, 0.8575, 1e-3);
}

TEST(Mle, RotatedBellPhaseIsFound)
{
    TomographyModel m;
    const auto el = build_projector_set(exact_settings(bell_state(0.8), m, 1e6), m);
    const auto r = mle_reconstruct(el);
    EXPECT_NEAR(r.max_bell_fidelity, 1.0, 1e-4);
    EXPECT_NEAR(std::remainder(r.bell_phase - 0.8, 2 * std::numbers::pi), 0.0, 1e-2);
    EXPECT_NEAR(r.fidelity_to_phi_plus, std::pow(std::cos(0.4), 2), 1e-3);
}

TEST(Mle, LikelihoodMonotoneAndStatePhysical)
{
    TomographyModel m;
    std::mt19937_64 g(2);
    auto settings = exact_settings(werner(0.8), m, 5e4);
    for (auto& s : settings)
        for (auto& c : s.counts)
            c = static_cast<double>(std::poisson_distribution<long>(std::max(c, 1e-9))(g));
    const auto el = build_projector_set(settings, m);
    MleOptions opt;
    opt.record_trace = true;
    const auto r = mle_reconstruct(el, opt);
    ASSERT_GE(r.trace.size(), 2u);
    for (std::size_t k = 1; k < r.trace.size(); ++k)
        EXPECT_GE(r.trace[k], r.trace[k - 1]);
    const Matrix4& rho = r.rho.matrix();
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
    EXPECT_LT((rho - rho.adjoint()).norm(), 1e-12);
    EXPECT_GE(min_eigenvalue(rho), -1e-12);
}

// Diagonal projectors with efficiencies: the Poisson MLE with N profiled out is
// rho_jj = (n_j / eta_j) / sum_k (n_k / eta_k).
TEST(Mle, ToyClosedForm)
{
    const std::array<double, 4> eta{0.9, 0.4, 0.25, 0.7};
    const std::array<double, 4> n{1200, 310, 95, 640};
    std::vector<TomoElement> el;
    for (int j = 0; j < 4; ++j) {
        Matrix4 p = Matrix4::Zero();
        p(j, j) = eta[j];
        el.push_back({p, n[j], "toy"});
    }
    MleOptions opt;
    opt.relative_tolerance = 0.0;
    opt.gradient_tolerance = 1e-12;
    const auto r = mle_reconstruct(el, opt);
    double norm = 0;
    for (int j = 0; j < 4; ++j)
        norm += n[j] / eta[j];
    for (int j = 0; j < 4; ++j)
        EXPECT_NEAR(r.rho(j, j).real(), n[j] / eta[j] / norm, 1e-8);
    EXPECT_NEAR(r.pair_number, norm, 1e-6 * norm);
}

TEST(Mle, OrderInvariance)
{
    TomographyModel m;
    std::mt19937_64 g(3);
    auto settings = exact_settings(werner(0.85), m, 2e4);
    for (auto& s : settings)
        for (auto& c : s.counts)
            c = static_cast<double>(std::poisson_distribution<long>(std::max(c, 1e-9))(g));
    auto el = build_projector_set(settings, m);
    MleOptions opt;
    opt.relative_tolerance = 0.0;
    opt.gradient_tolerance = 1e-11;
    const auto a = mle_reconstruct(el, opt);
    std::shuffle(el.begin(), el.end(), g);
    const auto b = mle_reconstruct(el, opt);
    EXPECT_LT((a.rho.matrix() - b.rho.matrix()).norm(), 1e-9);
}

TEST(Mle, RejectsEmptyAndZeroCounts)
{
    EXPECT_THROW(mle_reconstruct(std::vector<TomoElement>{}), DataError);
    std::vector<TomoElement> el{{Matrix4::Identity(), 0.0, "x"}};
    EXPECT_THROW(mle_reconstruct(el), DataError);
}

TEST(Mle, IterationLimitIsReportedNotThrown)
{
    TomographyModel m;
    const auto el = build_projector_set(exact_settings(werner(0.9), m, 1e6), m);
    MleOptions opt;
    opt.max_iterations = 2;
    opt.relative_tolerance = 0.0;
    opt.gradient_tolerance = 0.0;
    const auto r = mle_reconstruct(el, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 2);
    EXPECT_NEAR(r.rho.matrix().trace().real(), 1.0, 1e-12);
}

TEST(Uncertainty, BootstrapSpread)
{
    TomographyModel m;
    std::mt19937_64 g(4);
    auto settings = exact_settings(werner(0.9), m, 2e4);
    for (auto& s : settings)
        for (auto& c : s.counts)
            c = static_cast<double>(std::poisson_distribution<long>(std::max(c, 1e-9))(g));
    const auto el = build_projector_set(settings, m);
    const auto r = mle_reconstruct(el);
    const auto u = uncertainty(el, r, 30, 7);
    EXPECT_EQ(u.resamples, 30);
    EXPECT_GT(u.fidelity_std, 0.0);
    EXPECT_LT(u.fidelity_std, 0.05);
    EXPECT_GT(u.purity_std, 0.0);
    const auto again = uncertainty(el, r, 30, 7);
    EXPECT_EQ(again.fidelity_std, u.fidelity_std);
}

TEST(CountSetting, SimulatedCountsMatchExpectation)
{
    RunConfig cfg;
    cfg.noise.jitter_fwhm_signal = cfg.noise.jitter_fwhm_idler = 0.0;
    cfg.channels.demux_visibility_signal = cfg.channels.demux_visibility_idler = 1.0;
    TomographyModel m;
    m.channels = cfg.channels;
    const std::uint64_t trials = 2000000;
    for (auto b : standard_settings()) {
        const auto stream = simulate_setting_stream(cfg, b, trials, 1);
        const auto counted = count_setting(find_coincidences(stream), b, m);
        const auto expected = expected_setting(source_state(cfg.source), b, m, static_cast<double>(trials));
        const double nc = std::accumulate(counted.counts.begin(), counted.counts.end(), 0.0);
        const double ne = std::accumulate(expected.counts.begin(), expected.counts.end(), 0.0);
        EXPECT_NEAR(nc / ne, 1.0, 5.0 / std::sqrt(ne) + 0.01);
        // per-outcome agreement for the well-populated cells
        for (std::size_t k = 0; k < counted.counts.size(); ++k)
            if (expected.counts[k] > 400)
                EXPECT_NEAR(counted.counts[k], expected.counts[k], 5 * std::sqrt(expected.counts[k]) + 0.03 * expected.counts[k]);
    }
}
