#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fbent/config.hpp"
#include "fbent/error.hpp"
#include "fbent/fwi.hpp"

using namespace fbent;

namespace {

struct QuietWarnings : ::testing::Environment {
    void SetUp() override { set_warning_handler([](std::string_view) {}); }
};
const auto* const quiet = ::testing::AddGlobalTestEnvironment(new QuietWarnings);

constexpr double kBk7 = 1.5007;

} // namespace

TEST(Opd, ReferenceGeometry)
{
    // 2 (1 + 10 n + 1 - 7.85) cm
    const double want = 2.0 * (0.02 + 0.10 * kBk7 - 0.0785);
    EXPECT_NEAR(opd(reference_design(), 0.0), want, 1e-12);
    EXPECT_NEAR(opd(reference_design(), 0.0), 0.1831, 2e-4);
}

TEST(Opd, EqualArmsGiveZero)
{
    FwiDesign d;
    d.long_arm = {{0.05, 1.0}, {0.03, 1.6}};
    d.short_arm = d.long_arm;
    for (double a : {0.0, 0.01, 0.05})
        EXPECT_NEAR(opd(d, a), 0.0, 1e-15);
}

TEST(Opd, AllAirQuadraticLoss)
{
    const double dl = 0.183;
    const auto d = unwidened_design(dl, 0.1, true);
    for (double a : {0.0, 0.005, 0.02, 0.05}) {
        const double s = std::sin(a);
        EXPECT_NEAR(opd(d, a) - opd(d, 0.0), -dl * s * s / 2.0, 1e-15);
    }
}

TEST(Opd, EvenInAngle)
{
    const auto d = reference_design();
    for (double a : {0.003, 0.02, 0.07})
        EXPECT_DOUBLE_EQ(opd(d, a), opd(d, -a));
}

TEST(DemuxDelay, Examples)
{
    const auto d = demux_delay(0.183);
    EXPECT_NEAR(d.delay, 610.4e-12, 0.1e-12);
    EXPECT_NEAR(d.bin_spacing / (2 * std::numbers::pi), 819.1e6, 0.1e6);
    EXPECT_NEAR(demux_delay(0.366).bin_spacing, d.bin_spacing / 2, 1e-6);
    EXPECT_NEAR(demux_length(2 * std::numbers::pi * 820e6), 0.1828, 1e-4);
    EXPECT_THROW(demux_delay(0.0), std::invalid_argument);
    EXPECT_THROW(demux_length(-1.0), std::invalid_argument);
}

TEST(DemuxDelay, RoundTrip)
{
    for (double dl : {0.01, 0.1831, 0.5, 2.0})
        EXPECT_NEAR(demux_length(demux_delay(dl).bin_spacing), dl, 1e-12 * dl);
}

TEST(SolveWidened, ClosedFormGlassLength)
{
    for (double dl : {0.12, 0.183, 0.25}) {
        const auto d = solve_widened(kBk7, AirGaps{}, dl, true);
        const double g = dl / (2.0 * (kBk7 - 1.0 / kBk7));
        ASSERT_EQ(d.long_arm.size(), 2u);
        EXPECT_NEAR(d.long_arm[1].length, g, 1e-15);
        EXPECT_NEAR(d.widening_coefficient(), 0.0, 1e-12);
        EXPECT_NEAR(opd(d, 0.0), dl, 1e-12);
        EXPECT_NEAR(opd(d, 0.01), opd(d, 0.0), 1e-15);
    }
    EXPECT_NEAR(solve_widened(kBk7, AirGaps{}, 0.183, true).long_arm[1].length, 0.1097, 1e-4);
}

TEST(SolveWidened, HighIndexLimit)
{
    // n -> infinity: the glass optical length n g -> dL / m and it adds nothing to L/n.
    const auto d = solve_widened(1e6, AirGaps{0.02, 0.0}, 0.2, true);
    EXPECT_NEAR(d.long_arm[1].length * d.long_arm[1].index, 0.1, 1e-9);
    EXPECT_NEAR(d.short_arm.back().length, 0.02, 1e-7);
}

TEST(SolveWidened, Infeasible)
{
    EXPECT_THROW(solve_widened(1.0, AirGaps{}, 0.183, true), ConfigError);
    EXPECT_THROW(solve_widened(kBk7, AirGaps{}, -0.1, true), ConfigError);
    try {
        solve_widened(kBk7, AirGaps{0.0, 1.0}, 0.183, true);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("short-arm"), std::string::npos);
    }
}

TEST(DemuxVisibility, NarrowBinIsPerfect)
{
    SourceConfig src;
    const auto d = solve_widened(kBk7, AirGaps{}, demux_length(src.delta_omega), true);
    EXPECT_NEAR(demux_visibility(d, 0.0, src.delta_omega, 0.0), 1.0, 1e-9);
    EXPECT_NEAR(demux_visibility(d, src.gamma * 1e-4, src.delta_omega, 0.0), 1.0, 1e-3);
}

TEST(DemuxVisibility, WideningHelpsAtSpread)
{
    SourceConfig src;
    const double dl = demux_length(src.delta_omega);
    const auto w = solve_widened(kBk7, AirGaps{}, dl, true);
    const auto u = unwidened_design(dl, 0.1, true);
    const double vw0 = demux_visibility(w, src.gamma, src.delta_omega, 0.0);
    EXPECT_NEAR(demux_visibility(u, src.gamma, src.delta_omega, 0.0), vw0, 1e-6);
    const double vw = demux_visibility(w, src.gamma, src.delta_omega, 0.02);
    const double vu = demux_visibility(u, src.gamma, src.delta_omega, 0.02);
    EXPECT_NEAR(vw, vw0, 1e-9);
    EXPECT_GT(vw, vu);
}
