#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "ordstat/io.hpp"

using namespace ordstat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("ordstat_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

template <class Fn>
std::string schema_message(Fn&& fn) {
    try {
        fn();
    } catch (const io::SchemaError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Csv, CountsRoundTrip) {
    const auto dir = scratch("counts");
    io::write_file(dir / "y.csv", io::counts_csv({3, 0, 12}));
    EXPECT_EQ(io::read_counts(dir / "y.csv"), (std::vector<std::int64_t>{3, 0, 12}));
}

TEST(Csv, BadCountReportsLine) {
    const auto dir = scratch("badcount");
    io::write_file(dir / "y.csv", "y\n1\n# comment\n2\nx7\n");
    const auto msg = schema_message([&] { io::read_counts(dir / "y.csv"); });
    EXPECT_NE(msg.find(":5:"), std::string::npos) << msg;
    io::write_file(dir / "y.csv", "y\n1\n-2\n");
    EXPECT_NE(schema_message([&] { io::read_counts(dir / "y.csv"); }).find(":3: negative"), std::string::npos);
}

TEST(Csv, FieldCountMismatch) {
    const auto msg = schema_message([] { io::parse_csv("a,b\n1,2\n3\n", "t.csv"); });
    EXPECT_NE(msg.find("t.csv:3:"), std::string::npos) << msg;
}

TEST(Csv, TripletsFillMissingCellsWithZero) {
    const auto dir = scratch("trip");
    io::write_file(dir / "m.csv", "row,col,count\n0,0,4\n2,1,7\n");
    const auto d = io::read_triplets(dir / "m.csv");
    EXPECT_EQ(d.rows, 3);
    EXPECT_EQ(d.cols, 2);
    EXPECT_EQ(d.at(0, 0), 4);
    EXPECT_EQ(d.at(2, 1), 7);
    EXPECT_EQ(d.at(1, 1), 0);
    io::write_file(dir / "m.csv", "row,col,count\n0,0,4\n0,0,5\n");
    EXPECT_NE(schema_message([&] { io::read_triplets(dir / "m.csv"); }).find(":3: duplicate"), std::string::npos);
}

TEST(Csv, MaskMarksHeldoutCells) {
    const auto dir = scratch("mask");
    MatrixData d(2, 3);
    io::write_file(dir / "mask.csv", "row,col\n1,2\n");
    io::read_mask(dir / "mask.csv", d);
    EXPECT_FALSE(d.observed(1, 2));
    EXPECT_TRUE(d.observed(0, 0));
    EXPECT_EQ(io::mask_csv(d), "row,col\n1,2\n");
    io::write_file(dir / "mask.csv", "row,col\n5,0\n");
    EXPECT_THROW(io::read_mask(dir / "mask.csv", d), io::SchemaError);
}

TEST(Csv, FlightsRoundTrip) {
    const auto dir = scratch("flights");
    io::write_file(dir / "f.csv",
                   "origin,dest,distance_miles,minutes\nJFK,LAX,2475,330\nLAX,JFK,2475,300\nJFK,LAX,2475,341\n");
    const auto fd = io::read_flights(dir / "f.csv");
    EXPECT_EQ(fd.routes.size(), 2u);
    EXPECT_EQ(fd.y, (std::vector<std::int64_t>{330, 300, 341}));
    io::write_file(dir / "g.csv", io::flights_csv(fd));
    const auto back = io::read_flights(dir / "g.csv");
    EXPECT_EQ(back.y, fd.y);
    EXPECT_EQ(back.route_of, fd.route_of);
    io::write_file(dir / "f.csv", "origin,dest,distance_miles,minutes\nJFK,LAX,-1,3\n");
    EXPECT_NE(schema_message([&] { io::read_flights(dir / "f.csv"); }).find(":2:"), std::string::npos);
}

TEST(Config, DefaultsWhenSectionsAbsent) {
    const auto rc = io::parse_config(R"({"schema_version": 1})");
    EXPECT_EQ(rc.mcmc.n_chains, 4);
    EXPECT_EQ(rc.mcmc.thin, 20);
    EXPECT_EQ(rc.flights.d_max, 9);
    EXPECT_EQ(rc.resolved["iid-nb"]["rank"], "median");
}

TEST(Config, ReadsAllSections) {
    const auto rc = io::parse_config(R"({
  "schema_version": 1,
  "mcmc": {"chains": 2, "warmup": 10, "samples": 5, "thin": 1, "seed": 9},
  "iid-nb": {"rank": 3, "D": 5, "a": 2.5},
  "factorization": {"K": 4, "D": 7},
  "flights": {"infer_d": false, "fixed_d": 3}
})");
    EXPECT_EQ(rc.mcmc.seed, 9u);
    EXPECT_EQ(rc.iid.rule, RankRule::Explicit);
    EXPECT_EQ(rc.iid.r_explicit, 3);
    EXPECT_EQ(rc.iid.a, 2.5);
    EXPECT_EQ(rc.factorization.K, 4);
    EXPECT_FALSE(rc.flights.infer_d);
    EXPECT_EQ(rc.flights.fixed_d, 3);
}

TEST(Config, ErrorsCarryLineNumbers) {
    auto msg = schema_message([] { io::parse_config("{\"schema_version\": 1,\n\"mcmc\": {\n\"chians\": 2}}"); });
    EXPECT_NE(msg.find(":3: unknown key 'mcmc.chians'"), std::string::npos) << msg;
    msg = schema_message([] { io::parse_config("{\"schema_version\": 2}"); });
    EXPECT_NE(msg.find("schema_version"), std::string::npos) << msg;
    msg = schema_message([] { io::parse_config("{\"schema_version\": 1,\n\"mcmc\": {\"thin\": \"x\"}}"); });
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
    msg = schema_message([] { io::parse_config("{\"schema_version\": 1,\n\"mcmc\": {\"thin\": 0}}"); });
    EXPECT_FALSE(msg.empty());
    msg = schema_message([] { io::parse_config("{\n\"schema_version\": 1,\n}"); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}

TEST(Config, ShippedSchemaExampleParses) {
    const fs::path p = fs::path(ORDSTAT_SOURCE_DIR) / "schema" / "example_config.json";
    EXPECT_NO_THROW(io::read_config(p));
}

TEST(Samples, DirectoryRoundTripIsExact) {
    PosteriorSamples ps;
    ps.model = "iid-nb";
    ps.seed = 42;
    ps.config_hash = "00ff";
    ps.n_chains = 2;
    ps.n_samples = 2;
    ps.chain_of = {0, 0, 1, 1};
    ps.params["alpha"] = {{0.1}, {1.0 / 3.0}, {2e-300}, {123456.789}};
    ps.params["theta"] = {{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    ps.chains = {{0, 11, 10, 3, 1}, {1, 12, 10, 4, 0}};
    const auto dir = scratch("samples");
    io::write_samples(dir, ps);
    const auto back = io::read_samples(dir);
    EXPECT_EQ(back.params, ps.params);
    EXPECT_EQ(back.chain_of, ps.chain_of);
    EXPECT_EQ(back.model, ps.model);
    EXPECT_EQ(back.config_hash, ps.config_hash);
    ASSERT_EQ(back.chains.size(), 2u);
    EXPECT_EQ(back.chains[1].categorical_steps, 4);
}

TEST(Manifest, NoTimestampsAndStableDigest) {
    const auto dir = scratch("manifest");
    io::write_file(dir / "in.csv", "y\n1\n");
    io::RunManifest m;
    m.command = "fit";
    m.seed = 3;
    m.add_input(dir / "in.csv");
    const auto j = m.to_json();
    EXPECT_EQ(j["version"], io::kVersion);
    EXPECT_EQ(j["inputs"]["in.csv"], hex64(fnv1a64("y\n1\n")));
    EXPECT_FALSE(j.contains("timestamp"));
    EXPECT_EQ(m.to_json().dump(), j.dump());
}
