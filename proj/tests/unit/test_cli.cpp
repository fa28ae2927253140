#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gblab/runner.hpp"

using namespace gblab;
using namespace gblab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gblab_cli_" + name);
  fs::remove_all(p);
  return p;
}

int invoke(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "gblab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

}  // namespace

TEST(Config, MergeRejectsUnknownAndMistypedFields) {
  json base = defaults_solve();
  try {
    merge_config(base, json{{"solver", {{"lamda", 2.0}}}}, "");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("solver.lamda"), std::string::npos);
  }
  try {
    merge_config(base, json{{"solver", {{"lambda", "two"}}}}, "");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("solver.lambda"), std::string::npos);
  }
  json ok = defaults_solve();
  merge_config(ok, json{{"solver", {{"lambda", 4}}}}, "");
  EXPECT_EQ(field<double>(ok, "solver.lambda"), 4.0);
  EXPECT_EQ(field<double>(ok, "solver.K"), 4.0);
}

TEST(Config, FieldLookupNamesThePath) {
  const json j = {{"a", {{"b", "x"}}}};
  EXPECT_EQ(field<std::string>(j, "a.b"), "x");
  try {
    field<double>(j, "a.b");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("a.b"), std::string::npos);
  }
  EXPECT_THROW(field<double>(j, "a.c"), InvalidArgument);
}

TEST(Config, EveryCommandHasDefaults) {
  for (const char* c : {"solve", "inflate", "norms", "verify.counting", "verify.embeddings", "verify.bilinear",
                        "verify.l4"}) {
    const auto d = defaults_for(c);
    EXPECT_TRUE(d.contains("seed")) << c;
    EXPECT_TRUE(d.contains("workers")) << c;
  }
  EXPECT_THROW(defaults_for("verify.nothing"), InvalidArgument);
}

TEST(ExitCodes, OracleFailureOutranksAssertionFailure) {
  EXPECT_EQ(exit_of({check_lt("a", "", 0.0, 1.0)}), Exit::Pass);
  EXPECT_EQ(exit_of({check_lt("a", "", 2.0, 1.0)}), Exit::Fail);
  EXPECT_EQ(exit_of({check_lt("a", "", 2.0, 1.0), check_lt("b", "", 2.0, 1.0, true)}), Exit::Internal);
  const auto j = to_json(check_in("c", "anchor", 0.5, 0.4, 0.6));
  EXPECT_EQ(j["tolerance"], json({0.4, 0.6}));
  EXPECT_EQ(j["anchor"], "anchor");
}

TEST(SpectrumIo, RoundTripsAllThreeShapes) {
  Rng rng(3);
  const auto lat = make_lattice(2.0, 3.0);
  const auto f = random_field(lat, rng);
  std::stringstream a;
  write_spectrum(a, f);
  const auto da = read_spectrum(a);
  EXPECT_EQ(da.rows, 0u);
  EXPECT_EQ(field_of(da).coeff, f.coeff);

  SpacetimeSpectrum U(lat, TauGrid{5, 0.5, -3.0});
  for (auto& c : U.coeff) c = cplx{std::normal_distribution<double>()(rng), 1.0};
  std::stringstream b;
  write_spectrum(b, U);
  const auto Ub = spacetime_of(read_spectrum(b), 0.5, -3.0);
  EXPECT_EQ(Ub.coeff, U.coeff);
  EXPECT_EQ(Ub.grid, U.grid);

  Trajectory tr(lat, -1.0, 0.25, 9);
  for (std::size_t i = 0; i < tr.data.size(); ++i) tr.data[i] = cplx{static_cast<double>(i), -1.0};
  std::stringstream c;
  write_spectrum(c, tr);
  const auto tc = trajectory_of(read_spectrum(c), -1.0, 0.25);
  EXPECT_EQ(tc.data, tr.data);
  EXPECT_EQ(tc.count, 9u);
}

TEST(SpectrumIo, HeaderLayoutIsLittleEndian) {
  const auto lat = make_lattice(4.0, 1.0);
  SpectralField f(lat);
  f.set_j(1, cplx{1.5, -2.0});
  std::stringstream s;
  write_spectrum(s, f);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 32u + 16u * lat.modes());
  auto u64_at = [&](std::size_t off) {
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(i)]);
    return x;
  };
  EXPECT_EQ(std::bit_cast<double>(u64_at(0)), 4.0);
  EXPECT_EQ(std::bit_cast<double>(u64_at(8)), 1.0);
  EXPECT_EQ(u64_at(16), lat.modes());
  EXPECT_EQ(u64_at(24), 0u);
  const std::size_t off = 32 + 16 * lat.index_of_j(1);
  EXPECT_EQ(std::bit_cast<double>(u64_at(off)), 1.5);
  EXPECT_EQ(std::bit_cast<double>(u64_at(off + 8)), -2.0);
}

TEST(SpectrumIo, RejectsDamagedFiles) {
  const auto lat = make_lattice(1.0, 2.0);
  std::stringstream s;
  write_spectrum(s, SpectralField(lat));
  const std::string good = s.str();
  std::stringstream truncated(good.substr(0, good.size() - 3));
  EXPECT_THROW(read_spectrum(truncated), InvalidArgument);
  std::stringstream trailing(good + "x");
  EXPECT_THROW(read_spectrum(trailing), InvalidArgument);
  SpectrumDump d = read_spectrum(s);
  d.K = 5.0;
  EXPECT_THROW(lattice_of(d), InvalidArgument);
  EXPECT_THROW(spacetime_of(d, 1.0), InvalidArgument);
}

TEST(Solve, ZeroDataGivesZeroTrajectory) {
  json cfg = defaults_solve();
  cfg["data"]["kind"] = "zero";
  const auto r = run_solve(cfg);
  EXPECT_EQ(exit_of(r.checks), Exit::Pass);
  for (const auto& [name, bytes] : r.outputs.files) {
    if (name != "trajectory.bin") continue;
    std::stringstream s(bytes);
    const auto d = read_spectrum(s);
    EXPECT_GT(d.rows, 1u);
    for (const auto& c : d.data) EXPECT_EQ(c, cplx{});
  }
}

TEST(Solve, ContractingRunRecordsResidualAndReference) {
  const auto r = run_solve(defaults_solve());
  ASSERT_EQ(exit_of(r.checks), Exit::Pass);
  json rep;
  for (const auto& [name, bytes] : r.outputs.files)
    if (name == "solve.json") rep = json::parse(bytes);
  EXPECT_LT(rep["residual"].get<double>(), 1e-12);
  EXPECT_LT(rep["reference"]["endpoint_relative_difference"].get<double>(), 1e-6);
  EXPECT_EQ(rep["time_grid"]["count"].get<int>(), 257);
}

TEST(Solve, DivergenceIsAFindingNotACrash) {
  json cfg = defaults_solve();
  cfg["data"]["amplitude"] = 200.0;
  cfg["solver"]["K"] = 4.0;
  cfg["solver"]["dt"] = 0.01;
  const auto r = run_solve(cfg);
  EXPECT_EQ(exit_of(r.checks), Exit::Fail);
}

TEST(Cli, MalformedConfigExitsTwoAndWritesNothing) {
  const auto dir = scratch("bad");
  const auto cfgdir = scratch("bad_cfg");
  const auto p = write_config(cfgdir, {{"solver", {{"dt", 0.3}}}});
  std::string err;
  EXPECT_EQ(invoke({"solve", "--config", p.string(), "--out-dir", dir.string()}, nullptr, &err), 2);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_NE(err.find("solver"), std::string::npos);

  std::ofstream(cfgdir / "broken.json") << "{ not json";
  EXPECT_EQ(invoke({"solve", "--config", (cfgdir / "broken.json").string(), "--out-dir", dir.string()}), 2);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({"verify", "nothing"}), 2);
  EXPECT_EQ(invoke({"solve", "--workers", "0"}), 2);
  EXPECT_EQ(invoke({}), 2);
  EXPECT_EQ(invoke({"norms", "--out-dir", scratch("nonorm").string()}), 2);
}

TEST(Cli, PrintDefaults) {
  std::string out;
  EXPECT_EQ(invoke({"--print-defaults"}, &out), 0);
  const auto j = json::parse(out);
  EXPECT_TRUE(j.contains("solve"));
  EXPECT_TRUE(j["verify"].contains("counting"));
  EXPECT_EQ(invoke({"verify", "l4", "--print-defaults"}, &out), 0);
  EXPECT_EQ(json::parse(out), defaults_l4());
}

TEST(Cli, OracleDisagreementExitsThree) {
  const auto dir = scratch("oracle");
  const auto p = write_config(scratch("oracle_cfg"), {{"reference", {{"tolerance", 1e-300}}}});
  EXPECT_EQ(invoke({"solve", "--config", p.string(), "--out-dir", dir.string()}), 3);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, ManifestRerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  ASSERT_EQ(invoke({"solve", "--seed", "11", "--out-dir", a.string()}), 0);
  const auto m = read_json(a / "manifest.json");
  EXPECT_EQ(m["seed"].get<std::uint64_t>(), 11u);
  EXPECT_EQ(m["command"], "solve");
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_FALSE(m.contains("wall_time"));
  ASSERT_EQ(invoke({"solve", "--config", (a / "manifest.json").string(), "--out-dir", b.string()}), 0);
  for (const auto& name : m["outputs"]) EXPECT_EQ(slurp(a / name.get<std::string>()), slurp(b / name.get<std::string>()));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_TRUE(fs::exists(a / "run.log"));
  EXPECT_EQ(invoke({"inflate", "--config", (a / "manifest.json").string(), "--out-dir", scratch("rerun_c").string()}),
            2);
}

TEST(Cli, SeedChangesRandomData) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(invoke({"solve", "--seed", "1", "--out-dir", a.string()}), 0);
  ASSERT_EQ(invoke({"solve", "--seed", "2", "--out-dir", b.string()}), 0);
  EXPECT_NE(slurp(a / "u0.bin"), slurp(b / "u0.bin"));
}

TEST(Cli, NormsOfADump) {
  const auto a = scratch("norms_src"), b = scratch("norms_out");
  ASSERT_EQ(invoke({"solve", "--out-dir", a.string()}), 0);
  ASSERT_EQ(invoke({"norms", (a / "u0.bin").string(), "--out-dir", b.string()}), 0);
  const auto j = read_json(b / "norms.json");
  EXPECT_EQ(j["kind"], "field");
  EXPECT_NEAR(j["norms"][0]["h_norm"].get<double>(), 0.05, 1e-12);
}

TEST(Inflate, MissingNlistIsScannedAndRecorded) {
  json cfg = defaults_inflate();
  cfg["count"] = 2;
  const auto r = run_inflate(cfg);
  const auto expect = auto_nlist(8.0, 1.0, 2, 1.8);
  EXPECT_EQ(field<std::vector<double>>(r.config, "Nlist"), expect);
  for (double N : expect) EXPECT_TRUE(check_cond_N(8.0, N, 1.0).pass);
  bool seen = false;
  for (const auto& c : r.checks) seen = seen || c.name == "solution_plateau";
  EXPECT_TRUE(seen);
}

TEST(Inflate, RejectsFailingNlist) {
  json cfg = defaults_inflate();
  cfg["Nlist"] = {10.0};
  EXPECT_THROW(run_inflate(cfg), InvalidArgument);
}

TEST(Verify, CountingSmallGrid) {
  json cfg = defaults_counting();
  cfg["lambdas"] = {1.0, 2.0};
  cfg["M_max"] = 4.0;
  cfg["random_per_k"] = 500;
  cfg["duality_points"] = 50;
  const auto r = run_counting(cfg);
  std::string csv;
  for (const auto& [name, bytes] : r.outputs.files)
    if (name == "counting.csv") csv = bytes;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2 * 9);
  for (const auto& c : r.checks) {
    if (c.name == "duality_identities" || c.name.find("lambda_doubling") != std::string::npos) {
      EXPECT_TRUE(c.pass) << c.name << " " << c.value;
    }
  }
}

TEST(Verify, EmbeddingsWorkersAreDeterministic) {
  json cfg = defaults_embeddings();
  cfg["fields"] = 6;
  cfg["lambdas"] = {1.0, 2.0};
  const auto a = run_embeddings(cfg);
  cfg["workers"] = 3;
  const auto b = run_embeddings(cfg);
  ASSERT_EQ(a.outputs.files.size(), b.outputs.files.size());
  for (std::size_t i = 0; i < a.outputs.files.size(); ++i) EXPECT_EQ(a.outputs.files[i], b.outputs.files[i]);
  EXPECT_EQ(a.checks.size(), 2u * 3u * 6u);
}

TEST(Verify, BilinearEmitsSlopes) {
  json cfg = defaults_bilinear();
  cfg["lambdas"] = {1.0, 2.0};
  cfg["generator"] = "random";
  cfg["trials"] = 1;
  const auto r = run_bilinear(cfg);
  json j;
  for (const auto& [name, bytes] : r.outputs.files)
    if (name == "bilinear.json") j = json::parse(bytes);
  ASSERT_EQ(j["sweeps"].size(), 3u);
  for (const auto& s : j["sweeps"]) {
    EXPECT_TRUE(s["slope"].is_number());
    EXPECT_EQ(s["lambda"].size(), 2u);
  }
  cfg["slope_ranges"] = {{"uvw", {0.0, 1.0}}};
  EXPECT_THROW(run_bilinear(cfg), InvalidArgument);
}

TEST(Verify, L4Suite) {
  json cfg = defaults_l4();
  cfg["fields"] = 5;
  cfg["lambdas"] = {1.0, 2.0};
  const auto r = run_l4(cfg);
  EXPECT_EQ(exit_of(r.checks), Exit::Pass);
}
