#include "gpo/coarse.hpp"
#include "gpo/eval.hpp"
#include "gpo/field.hpp"
#include "gpo/text_table.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

using namespace gpo;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run gpo_cli(const std::string &args) {
  const auto log = std::filesystem::temp_directory_path() / "gpo_test_cli_stdout.txt";
  const std::string cmd = std::string("\"") + GPO_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(log);
  return r;
}

} // namespace

TEST_CASE("version and usage errors") {
  const auto v = gpo_cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.rfind("gpo 0.3.0", 0) == 0);
  CHECK(gpo_cli("").code == 2);
  CHECK(gpo_cli("nonsense").code == 2);
  CHECK(gpo_cli("register --mode sideways").code == 2);
  CHECK(gpo_cli("gradcheck --trials 0").code == 2);
}

TEST_CASE("print-config echoes the reference defaults") {
  const auto r = gpo_cli("register --print-config");
  CHECK(r.code == 0);
  for (const char *line : {"nodes.n = 1000", "optim.K = 10", "optim.tau_max = 100", "optim.eta_g = 1",
                           "optim.eta_t = 0.01", "optim.eta_r = 0.01", "loss.alpha_gcc = 0.4", "loss.alpha_ncc = 1"})
    CHECK(r.out.find(line) != std::string::npos);
  CHECK(gpo_cli("register --print-config --set optim.bogus=1").code == 2);
}

TEST_CASE("register: gcn identity exits 0, dcn without matches exits 2") {
  const auto dir = oracle::temp_dir("cli_register");
  save_png(oracle::smooth_image(64, 64), dir / "a.png");
  const std::string img = (dir / "a.png").string();
  const auto ok = gpo_cli("register --fixed " + img + " --moving " + img +
                          " --mode gcn --set optim.tau_max=20 nodes.grid_n=5 --out " + (dir / "out").string());
  CHECK(ok.code == 0);
  CHECK(std::filesystem::exists(dir / "out" / "field.gpof"));
  CHECK(field_stats(read_field(dir / "out" / "field.gpof")).mean_mag < 0.5);

  CHECK(gpo_cli("register --fixed " + img + " --moving " + img + " --mode dcn").code == 2);
  CHECK(gpo_cli("register --fixed " + (dir / "missing.png").string() + " --moving " + img + " --mode gcn").code == 1);
}

TEST_CASE("eval: zero error gives AUC 1, worked example gives 0.64, malformed input exits 2") {
  const auto dir = oracle::temp_dir("cli_eval");
  LandmarkPairs lm;
  lm.pairs = {{{5, 5}, {5, 5}}, {{20, 10}, {20, 10}}};
  write_landmarks(lm, dir / "lm.csv");
  write_field(DisplacementField(32, 32), dir / "f.gpof");
  write_transform(GlobalTransform::identity(), dir / "t.txt");
  const std::string common = " --field " + (dir / "f.gpof").string() + " --transform " + (dir / "t.txt").string();

  const auto zero = gpo_cli("eval --landmarks " + (dir / "lm.csv").string() + common + " --out " + (dir / "rep").string());
  CHECK(zero.code == 0);
  CHECK(zero.out.find("auc@15=1.000000") != std::string::npos);
  CHECK(zero.out.find("auc@25=1.000000") != std::string::npos);
  CHECK(zero.out.find("auc@50=1.000000") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "rep" / "auc.csv"));

  LandmarkPairs ten;
  ten.pairs = {{{5, 5}, {11, 13}}};
  write_landmarks(ten, dir / "ten.csv");
  const auto r = gpo_cli("eval --landmarks " + (dir / "ten.csv").string() + common + " --thresholds 25");
  CHECK(r.code == 0);
  CHECK(r.out.find("auc@25=0.640000") != std::string::npos);

  write_text_file(dir / "bad.csv", "x_f,y_f\n1,2\n");
  CHECK(gpo_cli("eval --landmarks " + (dir / "bad.csv").string() + common).code == 2);
}

TEST_CASE("synth bundles are byte-identical across runs") {
  const auto dir = oracle::temp_dir("cli_synth");
  const std::string args = " --seed 4 --size 96 --count 2 --landmark-count 10 --match-count 30";
  REQUIRE(gpo_cli("synth" + args + " --out " + (dir / "a").string()).code == 0);
  REQUIRE(gpo_cli("synth" + args + " --out " + (dir / "b").string()).code == 0);
  for (const char *pair : {"pair_000", "pair_001"})
    for (const char *f : {"fixed.png", "moving.gpoi", "landmarks.csv", "matches.csv", "gt_field.gpof", "manifest.txt"})
      CHECK(read_text_file(dir / "a" / pair / f) == read_text_file(dir / "b" / pair / f));
  CHECK(read_text_file(dir / "a" / "pair_000" / "fixed.png") != read_text_file(dir / "a" / "pair_001" / "fixed.png"));
}

TEST_CASE("synth with no deformation keeps landmarks on the transform") {
  const auto dir = oracle::temp_dir("cli_synth_rigid");
  REQUIRE(gpo_cli("synth --seed 2 --size 96 --deform-max 0 --landmark-count 10 --match-count 30 --out " +
                  (dir / "p").string())
              .code == 0);
  const auto lm = read_landmarks(dir / "p" / "landmarks.csv");
  const auto t = read_transform(dir / "p" / "gt_transform.txt");
  for (const auto &m : lm.pairs) CHECK(norm(t.apply(m.fixed) - m.moving) < 1e-9);
}

TEST_CASE("gradcheck defaults pass and sweep rejects an empty grid") {
  const auto g = gpo_cli("gradcheck --trials 2");
  CHECK(g.code == 0);
  CHECK(g.out.find("pass=true") != std::string::npos);

  const auto dir = oracle::temp_dir("cli_sweep");
  std::filesystem::create_directories(dir / "pairs");
  CHECK(gpo_cli("sweep --pairs " + (dir / "pairs").string() + " --out " + (dir / "o").string()).code == 2);
}
