#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "geoattack/harness.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(GEOATTACK_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Tiny two-class corpus in the directory layout, plus lexicon and vectors.
fs::path corpus() {
  const fs::path dir = toy::scratch("cli");
  const char* pos[] = {"a good film", "great acting and a good story", "good fun", "a great movie", "good good film"};
  const char* neg[] = {"a bad film", "awful acting and a bad story", "bad fun", "an awful movie", "bad bad film"};
  for (const char* split : {"train", "test"})
    for (int i = 0; i < 5; ++i) {
      toy::write(dir / split / "pos" / (std::to_string(i) + ".txt"), pos[i]);
      toy::write(dir / split / "neg" / (std::to_string(i) + ".txt"), neg[i]);
    }
  toy::write(dir / "lex.tsv", "good\tgreat,fine\nbad\tawful\ngreat\tgood\nfilm\tmovie\n");
  toy::write(dir / "emb.txt", "good 0.5 0.1 0 0\nbad -0.5 0.1 0 0\nfilm 0 0 1 0\n");
  return dir;
}

}  // namespace

TEST_CASE("cli: train, attack, advtrain and report") {
  const fs::path d = corpus();
  const std::string data = (d).string();
  REQUIRE(run("train --data " + data + " --emb " + (d / "emb.txt").string() +
              " --emb-dim 4 --hidden 6 --epochs 30 --batch 2 --lr 0.02 --seed 5 --out " + (d / "run").string()) == 0);
  CHECK(fs::exists(d / "run" / "model.ckpt"));
  CHECK(fs::exists(d / "run" / "vocab.txt"));
  CHECK(fs::exists(d / "run" / "config_echo.json"));
  CHECK(fs::exists(d / "run" / "metrics.json"));

  REQUIRE(run("attack --ckpt " + (d / "run").string() + " --data " + data + " --lexicon " + (d / "lex.tsv").string() +
              " --budget 25 --trace --seed 3 --workers 2 --out " + (d / "atk").string()) == 0);
  const geoattack::Report rep = geoattack::parse_report(d / "atk" / "report.json");
  REQUIRE(rep.metrics);
  CHECK(rep.config["args"]["budget"] == "25");
  CHECK(fs::is_directory(d / "atk" / "traces"));

  // Replaying the config echo reproduces the report byte for byte.
  REQUIRE(run("attack --config " + (d / "atk" / "config_echo.json").string() + " --out " + (d / "atk2").string()) == 0);
  CHECK(slurp(d / "atk" / "per_example.csv") == slurp(d / "atk2" / "per_example.csv"));
  CHECK(geoattack::to_json(*geoattack::parse_report(d / "atk2" / "report.json").metrics) == geoattack::to_json(*rep.metrics));

  // The worker count never changes results.
  REQUIRE(run("attack --ckpt " + (d / "run").string() + " --data " + data + " --lexicon " + (d / "lex.tsv").string() +
              " --budget 25 --seed 3 --workers 1 --out " + (d / "atk1").string()) == 0);
  CHECK(slurp(d / "atk" / "per_example.csv") == slurp(d / "atk1" / "per_example.csv"));

  REQUIRE(run("advtrain --ckpt " + (d / "run").string() + " --data " + data + " --lexicon " +
              (d / "lex.tsv").string() + " --epochs 3 --cap 4 --seed 3 --out " + (d / "adv").string()) == 0);
  const auto curve = geoattack::parse_curve(d / "adv" / "curve.csv");
  CHECK(curve.size() == 4);
  CHECK(curve[0].epoch == 0);

  CHECK(run("report " + (d / "atk" / "report.json").string() + " " + (d / "atk1" / "report.json").string() +
            " --curve " + (d / "adv" / "curve.csv").string() + " --out " + (d / "plots").string()) == 0);
  CHECK(fs::exists(d / "plots" / "series_success_rate.csv"));
  CHECK(fs::exists(d / "plots" / "series_replacement_rate.csv"));
  CHECK(fs::exists(d / "plots" / "series_clean_accuracy.csv"));
}

TEST_CASE("cli: failures exit nonzero without partial outputs") {
  const fs::path d = corpus();
  CHECK(run("train --data " + d.string() + " --emb " + (d / "missing.txt").string() + " --seed 1 --out " +
            (d / "none").string()) != 0);
  CHECK_FALSE(fs::exists(d / "none"));
  CHECK(run("train --data " + d.string() + " --out " + (d / "noseed").string()) != 0);
  CHECK_FALSE(fs::exists(d / "noseed"));
  toy::write(d / "broken.json", "{not json");
  CHECK(run("report " + (d / "broken.json").string()) != 0);
  CHECK(run("attack --ckpt " + (d / "nothing").string() + " --data " + d.string() + " --lexicon " +
            (d / "lex.tsv").string() + " --seed 1 --out " + (d / "x").string()) != 0);
}

TEST_CASE("cli: checkpoint with a different vocabulary is rejected") {
  const fs::path d = corpus();
  REQUIRE(run("train --data " + d.string() + " --emb-dim 4 --hidden 6 --epochs 1 --seed 5 --out " +
              (d / "run").string()) == 0);
  toy::write(d / "run" / "vocab.txt", "<oov>\nsomething\nelse\n");
  CHECK(run("attack --ckpt " + (d / "run").string() + " --data " + d.string() + " --lexicon " +
            (d / "lex.tsv").string() + " --seed 1 --out " + (d / "atk").string()) != 0);
}
