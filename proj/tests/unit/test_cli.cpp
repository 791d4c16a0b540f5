#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/process.hpp"
#include "doctest.h"
#include "sensery/annotation.hpp"
#include "sensery/synthetic.hpp"

using namespace sensery;
using sensery::testing::quoted;
using sensery::testing::run_command;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SENSERY_CLI_PATH;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sensery_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

testing::RunResult cli(const std::string& args) { return run_command(quoted(kCli) + " " + args); }

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli("--help").code == 0);
  CHECK(cli("").code == 2);
  CHECK(cli("train --model crf").code == 2);
  CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("exit codes follow the error class") {
  const auto dir = scratch("codes");
  CHECK(cli("extract --corpus " + quoted((dir / "nope.txt").string()) + " --out x.jsonl").code == 3);

  write_file(dir / "bad.conll", "a\t_\tO\nb\t_\tI\n");
  CHECK(cli("train --train " + quoted((dir / "bad.conll").string()) + " --out " +
            quoted((dir / "m.json").string()))
            .code == 2);

  write_file(dir / "ok.conll", "we\t_\tO\nheard\t_\tO\nrain\t_\tB\n\n");
  const auto diverge = cli("train --train " + quoted((dir / "ok.conll").string()) + " --out " +
                           quoted((dir / "m.json").string()) + " --step 1e308 --epochs 3");
  CHECK(diverge.code == 4);

  CHECK(cli("train --model svm --train " + quoted((dir / "ok.conll").string()) + " --out m.json")
            .code == 2);
}

TEST_CASE("end-to-end through the subcommands") {
  const auto dir = scratch("flow");
  const auto world = dir / "world";
  REQUIRE(cli("synth --out " + quoted(world.string())).code == 0);
  const auto p = [&](const char* f) { return quoted((dir / f).string()); };
  const auto wp = [&](const char* f) { return quoted((world / f).string()); };

  REQUIRE(cli("extract --corpus " + wp("corpus.txt") + " --out " + p("phrases.jsonl")).code == 0);
  const auto phrases = read_phrases(dir / "phrases.jsonl");
  CHECK(phrases.size() > 100);

  const auto agg = cli("annotate aggregate --journal " + wp("responses.jsonl") + " --out " +
                       p("verdicts.json"));
  CHECK(agg.code == 0);
  CHECK(agg.output.find("kappa") != std::string::npos);

  REQUIRE(cli("build-sentences --phrases " + p("phrases.jsonl") + " --templates " +
              wp("templates_train.txt") + " --out " + p("train.conll"))
              .code == 0);
  REQUIRE(cli("train --model crf --train " + p("train.conll") + " --out " + p("crf.json") +
              " --epochs 5 --seed 3")
              .code == 0);
  REQUIRE(cli("train --model crf --train " + p("train.conll") + " --out " + p("crf2.json") +
              " --epochs 5 --seed 3")
              .code == 0);
  CHECK(slurp(dir / "crf.json") == slurp(dir / "crf2.json"));

  REQUIRE(cli("tag --model " + p("crf.json") + " --in " + p("train.conll") + " --out " +
              p("pred.conll"))
              .code == 0);
  const auto ev = cli("eval --json --gold " + p("train.conll") + " --pred " + p("pred.conll"));
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(ev.output)["f1"].get<double>() > 90.0);
  const auto smell = cli("eval --json --sense smell --gold " + p("train.conll") + " --pred " +
                         p("pred.conll"));
  REQUIRE(smell.code == 0);
  const auto by_sense = nlohmann::json::parse(smell.output)["per_sense"];
  CHECK(by_sense["audible"]["gold_spans"] == 0);
  CHECK(by_sense["olfactible"]["gold_spans"].get<long>() > 0);
  CHECK(cli("eval --sense taste --gold " + p("train.conll") + " --pred " + p("pred.conll")).code == 2);

  write_file(dir / "raw.txt", "I heard the sound of honking cars .\n");
  REQUIRE(cli("tag --text --model " + p("crf.json") + " --in " + p("raw.txt") + " --out " +
              p("raw.conll"))
              .code == 0);
  CHECK(slurp(dir / "raw.conll").find("honking\t") != std::string::npos);

  const auto pca = cli("pca --phrases " + p("phrases.jsonl") + " --embeddings " +
                       wp("vectors.txt") + " --out " + p("points.csv"));
  CHECK(pca.code == 0);
  CHECK(slurp(dir / "points.csv").rfind("phrase,sense,x,y\n", 0) == 0);

  const auto run = cli("run --config " + wp("config.json") + " --run-dir " + p("run"));
  CHECK(run.code == 0);
  CHECK(fs::exists(dir / "run" / "report.json"));

  const auto sweep = cli("sweep --config " + wp("config.json") + " --alphas 0.5,1 --out " +
                         p("sweep.csv"));
  CHECK(sweep.code == 0);
  CHECK(slurp(dir / "sweep.csv").rfind("sense,alpha,train_size,precision,recall,f1\n", 0) == 0);
}

TEST_CASE("LSTM training from the CLI is byte-reproducible") {
  const auto dir = scratch("lstm");
  write_file(dir / "t.conll",
             "we\t_\tO\nheard\t_\tO\nhonking\t_\tB\ncars\t_\tI\n\n"
             "the\t_\tO\nsmell\t_\tO\nof\t_\tO\npaint\t_\tB\n\n");
  const auto args = "train --model lstm --variant or,char --epochs 3 --seed 11 --word-dim 4 "
                    "--window-hidden 6 --char-dim 3 --char-hidden 4 --train " +
                    quoted((dir / "t.conll").string()) + " --out ";
  REQUIRE(cli(args + quoted((dir / "a.json").string())).code == 0);
  REQUIRE(cli(args + quoted((dir / "b.json").string())).code == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
}
