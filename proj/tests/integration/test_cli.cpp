#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fbent/fbent.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const fs::path& workdir()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("fbent_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Run {
    int code = -1;
    std::string err;
};

Run cli(const std::string& args)
{
    const auto errfile = workdir() / "stderr.txt";
    const std::string cmd = "cd '" + workdir().string() + "' && '" FBENT_CLI_PATH "' " + args + " 2> '" +
                            errfile.string() + "' > /dev/null";
    const int st = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = slurp(errfile);
    return r;
}

// The last stderr line is the error document; warnings may precede it.
Json error_doc(const Run& r)
{
    const auto pos = r.err.rfind("{\"error\"");
    return pos == std::string::npos ? Json() : Json::parse(r.err.substr(pos));
}

} // namespace

TEST(Cli, ZeroPairsWritesValidEmptyFile)
{
    ASSERT_EQ(cli("simulate --n-pairs 0 --out empty.bin").code, 0);
    fbent_stream* s = nullptr;
    ASSERT_EQ(fbent_stream_read((workdir() / "empty.bin").c_str(), &s), FBENT_OK) << fbent_last_error();
    EXPECT_EQ(fbent_stream_size(s), 0u);
    fbent_stream_destroy(s);
    EXPECT_TRUE(fs::exists(workdir() / "empty.bin.manifest.json"));
}

TEST(Cli, FixedSeedRerunIsByteIdentical)
{
    ASSERT_EQ(cli("simulate --n-pairs 20000 --seed 9 --out a.bin").code, 0);
    ASSERT_EQ(cli("simulate --n-pairs 20000 --seed 9 --out b.bin").code, 0);
    const auto a = slurp(workdir() / "a.bin");
    EXPECT_GT(a.size(), 1000u);
    EXPECT_EQ(a, slurp(workdir() / "b.bin"));
    const Json ma = Json::parse(slurp(workdir() / "a.bin.manifest.json"));
    const Json mb = Json::parse(slurp(workdir() / "b.bin.manifest.json"));
    EXPECT_EQ(ma.at("outputs")[0].at("fnv1a64"), mb.at("outputs")[0].at("fnv1a64"));
    EXPECT_EQ(ma.at("effective_config_fnv1a64"), mb.at("effective_config_fnv1a64"));
    EXPECT_EQ(ma.at("overrides").at("seed"), "9");

    ASSERT_EQ(cli("simulate --n-pairs 20000 --seed 10 --out c.bin").code, 0);
    EXPECT_NE(a, slurp(workdir() / "c.bin"));
}

TEST(Cli, ConfigErrorExitsTwoWithJson)
{
    const auto r = cli("simulate --n-pairs 10 --theta abc --out x.bin");
    EXPECT_EQ(r.code, 2);
    const Json e = error_doc(r);
    ASSERT_TRUE(e.is_object()) << r.err;
    EXPECT_EQ(e.at("error").at("kind"), "config");
    EXPECT_EQ(e.at("error").at("subcommand"), "simulate");

    std::ofstream(workdir() / "bad.cfg") << "seed = 1\nmystery = 2\n";
    EXPECT_EQ(cli("simulate --config bad.cfg --n-pairs 10 --out x.bin").code, 2);
    EXPECT_EQ(cli("simulate --config missing.cfg --n-pairs 10 --out x.bin").code, 2);
    EXPECT_EQ(cli("simulate --n-pairs 10").code, 2); // --out missing
}

TEST(Cli, DataErrorExitsThree)
{
    auto r = cli("jti --tags missing.bin --out j.json");
    EXPECT_EQ(r.code, 3);
    EXPECT_TRUE(error_doc(r).is_object()) << r.err;
    std::ofstream(workdir() / "garbage.csv") << "not,a,tag,file\n";
    EXPECT_EQ(cli("jti --tags garbage.csv --out j.json").code, 3);
    ASSERT_EQ(cli("simulate --n-pairs 0 --out none.bin").code, 0);
    r = cli("jti --tags none.bin --out j.json");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(error_doc(r).at("error").at("kind"), "data");
}

TEST(Cli, TomographyNonconvergenceExitsFour)
{
    ASSERT_EQ(cli("simulate --setting EE --trials 100000 --substream 0 --out ee.bin").code, 0);
    ASSERT_EQ(cli("simulate --setting EZ --trials 100000 --substream 1 --out ez.bin").code, 0);
    ASSERT_EQ(cli("simulate --setting ZE --trials 100000 --substream 2 --out ze.bin").code, 0);
    ASSERT_EQ(cli("simulate --setting ZZ --trials 100000 --substream 3 --out zz.bin").code, 0);
    ASSERT_EQ(cli("tomo --tags ee.bin ez.bin ze.bin zz.bin --count-table-out table.json --out t.json").code, 0);
    const Json t = Json::parse(slurp(workdir() / "t.json"));
    EXPECT_TRUE(t.dump().find("fidelity_to_phi_plus") != std::string::npos);

    const auto r = cli("tomo --counts table.json --max-iterations 2 --out t2.json");
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(error_doc(r).at("error").at("kind"), "nonconvergence");
    EXPECT_TRUE(fs::exists(workdir() / "t2.json"));
}

TEST(Cli, FwiAndQkd)
{
    ASSERT_EQ(cli("fwi --solve --out fwi.json --sweep sweep.csv").code, 0);
    const Json f = Json::parse(slurp(workdir() / "fwi.json"));
    EXPECT_NEAR(f.at("design").at("widening_coefficient").get<double>(), 0.0, 1e-12);
    EXPECT_TRUE(fs::exists(workdir() / "sweep.csv"));

    ASSERT_EQ(cli("qkd --xx 0.873 --zz 0.873 --out q.json").code, 0);
    EXPECT_NEAR(Json::parse(slurp(workdir() / "q.json")).at("qber_zz").get<double>(), 0.0635, 1e-4);
    EXPECT_EQ(cli("qkd --xx 2 --zz 0.9 --out q.json").code, 2);
}
