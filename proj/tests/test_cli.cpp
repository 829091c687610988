#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "support.hpp"

#if defined(_WIN32)
#define LINKGAP_EXIT_CODE(status) (status)
#else
#include <sys/wait.h>
#define LINKGAP_EXIT_CODE(status) (WIFEXITED(status) ? WEXITSTATUS(status) : -1)
#endif

using linkgap::testing::ScratchDir;

namespace {

int run_cli(const std::string& args, const ScratchDir& dir) {
  const std::string cmd = std::string("\"") + LINKGAP_CLI + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  return LINKGAP_EXIT_CODE(std::system(cmd.c_str()));
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  ScratchDir dir("cli-usage");
  CHECK(run_cli("", dir) == 1);
  CHECK(run_cli("experiment --no-such-flag 3", dir) == 1);
  CHECK(run_cli("experiment --max-epochs lots --input x", dir) == 1);
  CHECK(run_cli("predict -b x -d y -s 1,two", dir) == 1);
  CHECK(run_cli("--help", dir) == 0);
}

TEST_CASE("data errors exit with 2") {
  ScratchDir dir("cli-data");
  CHECK(run_cli("ingest --input \"" + (dir / "missing.jsonl").string() + "\" --output-dir \"" +
                    (dir / "out").string() + "\"",
                dir) == 2);
  std::ofstream(dir / "empty.jsonl").close();
  CHECK(run_cli("experiment --input \"" + (dir / "empty.jsonl").string() + "\" --output-dir \"" +
                    (dir / "out").string() + "\"",
                dir) == 2);
  CHECK(linkgap::read_file(dir / "stderr.txt").find("empty corpus") != std::string::npos);
}

TEST_CASE("synth, ingest and gradcheck succeed") {
  ScratchDir dir("cli-ok");
  const auto corpus = (dir / "s.jsonl").string();
  CHECK(run_cli("synth -o \"" + corpus + "\" --documents 5 --seed 3", dir) == 0);
  CHECK(std::filesystem::exists(corpus));
  CHECK(run_cli("ingest --input \"" + corpus + "\" --output-dir \"" + (dir / "out").string() + "\"", dir) == 0);
  CHECK(linkgap::read_file(dir / "stdout.txt").find("documents 5") != std::string::npos);
  CHECK(run_cli("gradcheck --seeds 3", dir) == 0);
  CHECK(linkgap::read_file(dir / "stdout.txt").find("PASS") != std::string::npos);
}
