#include <doctest.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../oracles.hpp"
#include "shapeinv/checkpoint.hpp"
#include "shapeinv/cli.hpp"
#include "shapeinv/io.hpp"
#include "shapeinv/metrics.hpp"
#include "shapeinv/nets.hpp"
#include "shapeinv/objective.hpp"

using namespace shapeinv;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("shapeinv_test_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "shapeinv");
  return cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes a small untrained model plus a planted latent and its output.
struct PlantedFixture {
  fs::path ckpt, latent, input;
  Vec z0;
  PointCloud full;

  explicit PlantedFixture(const fs::path& dir) {
    GeneratorArch g;
    g.latent_dim = 8;
    g.hidden = {16, 32};
    g.points = 48;
    DiscriminatorArch d;
    d.point_widths = {8, 16};
    d.head_widths = {8};
    const Checkpoint c = init_checkpoint(g, d, 4);
    ckpt = dir / "model.sinv";
    save_checkpoint(ckpt, c);
    Rng rng(9);
    z0 = sample_latent(8, rng);
    full = make_generator(c).generate(z0);
    latent = dir / "z0.txt";
    std::ofstream out(latent);
    out.precision(17);
    out << "# planted latent\n";
    for (Eigen::Index i = 0; i < z0.size(); ++i) out << z0[i] << "\n";
    out.close();
    input = dir / "partial.xyz";
    write_cloud(input, full);
  }
};

}  // namespace

TEST_CASE("parameter precedence: flag over file over default") {
  CLI::App app;
  cli::ParamTable table(app, {{"alpha", 1.5, "a"}, {"count", 3, "c"}, {"name", "x", "n"}, {"on", false, "b"}});
  app.parse(std::vector<std::string>{"2.5", "--alpha"});  // CLI11 takes the arguments reversed
  const cli::Json cfg = table.resolve({{"alpha", 9.0}, {"count", 7}});
  CHECK(cli::get_double(cfg, "alpha") == 2.5);
  CHECK(cli::get_size(cfg, "count") == 7);
  CHECK(cli::get_string(cfg, "name") == "x");
  CHECK_FALSE(cli::get_bool(cfg, "on"));
  CHECK_THROWS_AS(table.resolve({{"bogus", 1}}), Error);
  CHECK_THROWS_AS(table.resolve({{"count", -1}}), Error);
  CHECK_THROWS_AS(table.resolve({{"name", 3}}), Error);
}

TEST_CASE("bad integer flags are configuration errors") {
  CLI::App app;
  cli::ParamTable table(app, {{"count", 3, "c"}});
  app.parse(std::vector<std::string>{"2.5", "--count"});
  try {
    table.resolve(cli::Json::object());
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("exit codes") {
  TempDir tmp("exit");
  CHECK(invoke({}) == cli::kUsage);
  CHECK(invoke({"no-such-command"}) == cli::kUsage);
  CHECK(invoke({"gradcheck", "--help"}) == cli::kOk);
  CHECK(invoke({"gradcheck", "--configs", "lots"}) == cli::kUsage);
  CHECK(invoke({"complete", (tmp.path / "missing.xyz").string(), "--checkpoint",
             (tmp.path / "missing.sinv").string(), "--out", tmp.path.string()}) == cli::kIo);

  std::ofstream(tmp.path / "garbage.sinv") << "not a checkpoint";
  std::ofstream(tmp.path / "p.xyz") << "0 0 0\n1 1 1\n";
  CHECK(invoke({"complete", (tmp.path / "p.xyz").string(), "--checkpoint", (tmp.path / "garbage.sinv").string(),
             "--out", tmp.path.string()}) == cli::kBadCheckpoint);
  std::ofstream(tmp.path / "bad.xyz") << "0 0\n";
  CHECK(invoke({"eval", (tmp.path / "bad.xyz").string(), "--gt", (tmp.path / "p.xyz").string()}) ==
        cli::kBadInput);
  std::ofstream(tmp.path / "cfg.json") << R"({"unknown_key": 1})";
  CHECK(invoke({"gradcheck", "--config", (tmp.path / "cfg.json").string()}) == cli::kUsage);

  CHECK(cli::exit_code_for(ErrorCode::Diverged) == cli::kDiverged);
  CHECK(cli::exit_code_for(ErrorCode::NoCandidates) == cli::kNoCandidates);
  CHECK(cli::exit_code_for(ErrorCode::EmptyMask) == cli::kNoCandidates);
  CHECK(cli::exit_code_for(ErrorCode::ArchMismatch) == cli::kBadCheckpoint);
}

TEST_CASE("eval of identical clouds reports zero distance and a perfect score") {
  TempDir tmp("eval");
  Rng rng(3);
  write_cloud(tmp.path / "a.xyz", oracle::random_cloud(50, rng, 0.4));
  const fs::path table = tmp.path / "table.tsv";
  REQUIRE(invoke({"eval", (tmp.path / "a.xyz").string(), "--gt", (tmp.path / "a.xyz").string(), "--out",
               table.string()}) == cli::kOk);
  std::istringstream in(slurp(table));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "name\tCD(x1e4)\tF1(x100)");
  CHECK(row == "a\t0\t100");
}

TEST_CASE("eval adds MMD-EMD when references are given") {
  TempDir tmp("mmd");
  Rng rng(5);
  const PointCloud a = oracle::random_cloud(6, rng, 0.4);
  const PointCloud b = oracle::random_cloud(6, rng, 0.4);
  write_cloud(tmp.path / "a.xyz", a);
  write_cloud(tmp.path / "b.xyz", b);
  const fs::path table = tmp.path / "t.tsv";
  REQUIRE(invoke({"eval", (tmp.path / "a.xyz").string(), "--gt", (tmp.path / "a.xyz").string(), "--reference",
                  (tmp.path / "b.xyz").string(), "--normalization", "sphere", "--out", table.string()}) ==
          cli::kOk);
  const std::string text = slurp(table);
  const auto pos = text.find("MMD-EMD(x1e3)\t");
  REQUIRE(pos != std::string::npos);
  const double got = std::stod(text.substr(pos + 14));
  const double want = oracle::emd_by_permutation(normalize(a, Normalization::UnitSphere),
                                                 normalize(b, Normalization::UnitSphere)) * 1e3;
  CHECK(got == doctest::Approx(want).epsilon(1e-5));
  CHECK(invoke({"eval", (tmp.path / "a.xyz").string(), "--gt", (tmp.path / "a.xyz").string(), "--reference",
                (tmp.path / "b.xyz").string(), "--normalization", "cube"}) == cli::kUsage);
}

TEST_CASE("chair fixture separates k-mask from the fixed-scale masks") {
  const cli::LegRetention r = cli::chair_leg_retention(2048, 0.03, 0.003, 5, 0.03, 10, 0);
  CHECK(r.leg_points > 0);
  CHECK(r.k_mask >= 0.95);
  CHECK(r.tau_mask < 0.5);
  CHECK(r.voxel_mask < 0.5);
}

TEST_CASE("complete recovers a planted latent and is deterministic") {
  TempDir tmp("complete");
  const PlantedFixture fx(tmp.path);
  auto run_once = [&](const std::string& out) {
    return invoke({"complete", fx.input.string(), "--checkpoint", fx.ckpt.string(), "--out",
                (tmp.path / out).string(), "--plant", fx.latent.string(), "--mask", "kmask", "--k", "1",
                "--iterations", "3", "--init-samples", "8", "--seed", "5"});
  };
  CHECK(invoke({"complete", fx.input.string(), "--checkpoint", fx.ckpt.string(), "--out", (tmp.path / "x").string(),
                "--theta-rates", "1e-4,1e-4"}) == cli::kUsage);
  CHECK(invoke({"complete", fx.input.string(), "--checkpoint", fx.ckpt.string(), "--out", (tmp.path / "x").string(),
                "--theta-rates", "1e-4,0,1e-4,1e-4"}) == cli::kUsage);
  REQUIRE(run_once("a") == cli::kOk);
  REQUIRE(run_once("b") == cli::kOk);
  const PointCloud done = read_cloud(tmp.path / "a" / "partial" / "completed.xyz");
  CHECK(chamfer_cd_t(done, fx.full).value < 1e-6);
  for (const char* f : {"completed.xyz", "history.jsonl", "result.sinv", "summary.json"}) {
    CHECK(slurp(tmp.path / "a" / "partial" / f) == slurp(tmp.path / "b" / "partial" / f));
  }
  const auto cfg = cli::Json::parse(slurp(tmp.path / "a" / "partial" / "config.json"));
  CHECK(cfg.at("k") == 1);
  CHECK(cfg.at("checkpoint") == fx.ckpt.string());
}

TEST_CASE("checkpoint directory comes from the environment when not given") {
  TempDir tmp("env");
  const PlantedFixture fx(tmp.path);
  fs::copy_file(fx.ckpt, tmp.path / cli::kCheckpointFile);
  ::setenv(cli::kCheckpointDirEnv, tmp.path.string().c_str(), 1);
  const int rc = invoke({"complete", fx.input.string(), "--out", (tmp.path / "o").string(), "--iterations", "1",
                      "--init-samples", "4"});
  ::unsetenv(cli::kCheckpointDirEnv);
  CHECK(rc == cli::kOk);
  CHECK(fs::exists(tmp.path / "o" / "partial" / "completed.xyz"));
}

TEST_CASE("multi, jitter and morph write their outputs") {
  TempDir tmp("multi");
  const PlantedFixture fx(tmp.path);
  const std::string ck = fx.ckpt.string();
  REQUIRE(invoke({"multi", fx.input.string(), "--checkpoint", ck, "--out", (tmp.path / "m").string(), "--outputs",
               "2", "--iterations", "1", "--init-samples", "16", "--loss-threshold", "1e9"}) == cli::kOk);
  CHECK(fs::exists(tmp.path / "m" / "partial" / "result_0" / "completed.xyz"));
  CHECK(fs::exists(tmp.path / "m" / "partial" / "result_1" / "completed.xyz"));
  const std::string r0 = (tmp.path / "m" / "partial" / "result_0").string();
  const std::string r1 = (tmp.path / "m" / "partial" / "result_1").string();
  REQUIRE(invoke({"jitter", r0, "--out", (tmp.path / "j").string(), "--count", "3"}) == cli::kOk);
  REQUIRE(invoke({"morph", r0, r1, "--out", (tmp.path / "g").string(), "--steps", "4"}) == cli::kOk);
  std::size_t j = 0, g = 0;
  for (const auto& e : fs::directory_iterator(tmp.path / "j")) j += e.path().extension() == ".xyz";
  for (const auto& e : fs::directory_iterator(tmp.path / "g")) g += e.path().extension() == ".xyz";
  CHECK(j == 3);
  CHECK(g == 4);
}

TEST_CASE("gen-data writes shapes, partials and a manifest") {
  TempDir tmp("gen");
  REQUIRE(invoke({"gen-data", "--out", tmp.path.string(), "--family", "box", "--count", "3", "--points", "40",
               "--cut", "0.5"}) == cli::kOk);
  const auto m = cli::Json::parse(slurp(tmp.path / "manifest.json"));
  CHECK(m.at("shapes").size() == 3);
  CHECK(read_cloud(tmp.path / "shapes" / "shape_0002.xyz").size() == 40);
  CHECK(read_cloud(tmp.path / "partials" / "shape_0002.xyz").size() == 20);
}
