// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "razorq/cli.hpp"
#include "razorq/packing.hpp"
#include "razorq/tensor_io.hpp"

using namespace razorq;

namespace {

struct Run {
  int code;
  std::string out, err;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kSource = RAZORQ_SOURCE_DIR;

}  // namespace

TEST_CASE("help and usage errors") {
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  for (const char* s : {"quantize", "pack", "unpack", "report-compression", "analyze-alloc", "distill-demo"})
    CHECK(help.out.find(s) != std::string::npos);
  const auto sub = run({"quantize", "--help"});
  CHECK(sub.code == 0);
  for (const char* s : {"--in", "--rho", "--scheme", "--group", "--beta", "--eps", "--threads"})
    CHECK(sub.out.find(s) != std::string::npos);
  CHECK(run({"quantize", "--in", "x", "--no-such-flag"}).code == 1);
  CHECK(run({"no-such-command"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"quantize", "--in", "/nonexistent/w.rzt"}).code == 1);
  CHECK(run({"analyze-alloc", "--d-out", "16", "--rho", "1.5"}).code == 1);
}

TEST_CASE("report-compression on the Qwen3-shaped manifest") {
  const auto r = run({"report-compression", "--manifest", kSource + "/fixtures/manifests/qwen3_0p6b.json"});
  REQUIRE(r.code == 0);
  const auto j = r.json();
  CHECK(j["total_params"] == 596049920);
  CHECK(std::abs(j["compression_ratio_nominal"].get<double>() - 7.04) <= 0.01);
  const auto four = run({"report-compression", "--manifest", kSource + "/fixtures/manifests/qwen3_0p6b.json",
                         "--decoder-bits", "4"});
  CHECK(std::abs(four.json()["compression_ratio_nominal"].get<double>() - 3.94) <= 0.01);
  test::TempDir dir;
  test::spit(dir / "bad.json", "{\"layers\": 3}");
  CHECK(run({"report-compression", "--manifest", (dir / "bad.json").string()}).code == 1);
}

TEST_CASE("analyze-alloc ordering") {
  const auto r = run({"analyze-alloc", "--d-out", "256", "--rho", "0.125"});
  REQUIRE(r.code == 0);
  const auto j = r.json();
  const double sup = j["schemes"]["super"]["discrepancy"];
  const double rnd = j["schemes"]["random"]["discrepancy"];
  const double stk = j["schemes"]["stacked"]["discrepancy"];
  CHECK(sup <= rnd);
  CHECK(rnd < stk);
  CHECK(j["ordering_holds"] == true);
  CHECK(j["schemes"]["super"]["four_bit_rows"] == 32);
}

TEST_CASE("quantize then unpack") {
  test::TempDir dir;
  DenseMatrix w(1, 4);
  w(0, 0) = 0.5f;
  w(0, 1) = -1.0f;
  w(0, 2) = 0.0f;
  w(0, 3) = 2.0f;
  save_tensor_file(dir / "w.rzt", w);
  const auto q = run({"quantize", "--in", (dir / "w.rzt").string(), "--out", (dir / "w.rzq").string(), "--rho", "0",
                      "--group", "4"});
  REQUIRE(q.code == 0);
  const auto u = run({"unpack", "--in", (dir / "w.rzq").string(), "--out", (dir / "d.rzt").string(), "--codes-out",
                      (dir / "c.rzt").string()});
  REQUIRE(u.code == 0);
  // scale = 2 * mean|w| = 1.75
  const auto codes = load_tensor_file(dir / "c.rzt");
  CHECK(std::vector<float>(codes.data().begin(), codes.data().end()) == std::vector<float>{0, -1, 0, 1});
  const auto deq = load_tensor_file(dir / "d.rzt");
  CHECK(std::vector<float>(deq.data().begin(), deq.data().end()) == std::vector<float>{0, -1.75f, 0, 1.75f});

  // pack rebuilds the identical blob from codes and scales
  CHECK(run({"unpack", "--in", (dir / "w.rzq").string(), "--out", (dir / "d2.rzt").string(), "--scales-out",
             (dir / "s.rzt").string()})
            .code == 0);
  const auto p = run({"pack", "--codes", (dir / "c.rzt").string(), "--scales", (dir / "s.rzt").string(), "--out",
                      (dir / "p.rzq").string(), "--mode", "ternary", "--group", "4"});
  REQUIRE(p.code == 0);
  CHECK(test::slurp(dir / "p.rzq") == test::slurp(dir / "w.rzq"));

  // truncated blob
  auto bytes = test::slurp(dir / "w.rzq");
  bytes.pop_back();
  test::spit(dir / "bad.rzq", bytes);
  CHECK(run({"unpack", "--in", (dir / "bad.rzq").string(), "--out", (dir / "x.rzt").string()}).code == 1);
  CHECK(run({"inspect", "--in", (dir / "w.rzq").string()}).code == 0);
}

TEST_CASE("repeated runs are byte-identical") {
  test::TempDir dir;
  SeededRng rng(3);
  save_tensor_file(dir / "w.rzt", test::random_matrix(48, 96, rng, 1.0));
  for (int i = 0; i < 2; ++i) {
    const std::string n = std::to_string(i);
    REQUIRE(run({"quantize", "--in", (dir / "w.rzt").string(), "--out", (dir / ("w" + n + ".rzq")).string(), "--group",
                 "32", "--scheme", "random", "--seed", "9", "--threads", i == 0 ? "1" : "3"})
                .code == 0);
    REQUIRE(run({"distill-demo", "--steps", "5", "--history-out", (dir / ("h" + n + ".csv")).string()}).code == 0);
  }
  CHECK(test::slurp(dir / "w0.rzq") == test::slurp(dir / "w1.rzq"));
  CHECK(test::slurp(dir / "h0.csv") == test::slurp(dir / "h1.csv"));
}

TEST_CASE("installed binary") {
  test::TempDir dir;
  const std::string cmd = std::string("\"") + RAZORQ_CLI_PATH + "\" analyze-alloc --d-out 64 > \"" +
                          (dir / "a.json").string() + "\"";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto j = nlohmann::json::parse(std::string(reinterpret_cast<const char*>(test::slurp(dir / "a.json").data()), test::slurp(dir / "a.json").size()));
  CHECK(j["command"] == "analyze-alloc");
  const std::string bad = std::string("\"") + RAZORQ_CLI_PATH + "\" quantize --bogus 2>/dev/null";
  const int rc = std::system(bad.c_str());
  CHECK(WEXITSTATUS(rc) == 1);
}
