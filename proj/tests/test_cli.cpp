#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "shadow/cli/commands.hpp"
#include "shadow/cli/config.hpp"
#include "shadow/cli/output.hpp"

using namespace shadow;
using namespace shadow::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Scratch {
 public:
  explicit Scratch(const std::string& tag) {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("shadow_cli_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  [[nodiscard]] const fs::path& dir() const { return dir_; }

  fs::path write(const std::string& name, const json& doc) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

 private:
  fs::path dir_;
};

json lorenz_doc(const fs::path& out) {
  return json{{"system", {{"type", "lorenz63"}}},
              {"march",
               {{"T", 4}, {"segment", 0.2}, {"dt", 0.01}, {"m", 1}, {"spinup_initial", 5}, {"spinup_final", 2}}},
              {"seed", 3},
              {"output_dir", out.string()}};
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::string& command, const fs::path& config, CommandOptions options = {}) {
  std::ostringstream out, err;
  const int code = run_command(command, config, options, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void expect_invalid(const json& doc) {
  CHECK_THROWS_AS((void)parse_config(doc), ConfigError);
}

}  // namespace

TEST_CASE("config rejects unknown keys at every level") {
  const json good = lorenz_doc("out");
  CHECK_NOTHROW((void)parse_config(good));
  json root = good;
  root["sead"] = 1;
  expect_invalid(root);
  json nested = good;
  nested["march"]["segmnt"] = 0.2;
  expect_invalid(nested);
  json system = good;
  system["system"]["sigmaa"] = 10;
  expect_invalid(system);
}

TEST_CASE("config type and range errors") {
  json doc = lorenz_doc("out");
  doc["march"]["T"] = "100";
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc["march"]["m"] = 3;  // m must stay below n for a march
  const RunConfig full = parse_config(doc);  // accepted for lyapunov
  CHECK(full.march.m == 3);
  doc["march"]["m"] = 4;
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc["march"]["dt"] = -0.01;
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc["ensemble"] = 0;
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc["objective"] = "spatial_mean";
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc.erase("march");
  expect_invalid(doc);
  doc = lorenz_doc("out");
  doc["integrator"] = "euler";
  expect_invalid(doc);
}

TEST_CASE("march with m >= n exits with the invalid-config code") {
  Scratch s("mn");
  json doc = lorenz_doc(s.dir() / "out");
  doc["march"]["m"] = 3;
  const Outcome r = invoke("run", s.write("c.json", doc));
  CHECK(r.code == kExitInvalidConfig);
  CHECK(!fs::exists(s.dir() / "out" / "summary.json"));
}

TEST_CASE("config hash is stable and sensitive to content") {
  const RunConfig a = parse_config(lorenz_doc("out/a"));
  const RunConfig b = parse_config(lorenz_doc("elsewhere"));
  CHECK(config_hash(a) == config_hash(parse_config(lorenz_doc("out/a"))));
  CHECK(config_hash(a) == config_hash(b));
  json doc = lorenz_doc("out/a");
  doc["seed"] = 4;
  CHECK(config_hash(a) != config_hash(parse_config(doc)));
  doc = lorenz_doc("out/a");
  doc["threads"] = 8;
  CHECK(config_hash(a) == config_hash(parse_config(doc)));
  Provenance p{config_hash(a), "0.1.0", "run"};
  CHECK(p.hash_hex().size() == 16);
  CHECK(p.comment() == "# config_hash=" + p.hash_hex() + ",version=0.1.0,command=run");
}

TEST_CASE("doubles are written in shortest round-trip form") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> exponent(-300.0, 300.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::pow(10.0, exponent(rng)) * (i % 2 ? -1.0 : 1.0);
    const std::string s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("run output files are deterministic across repeats and thread counts") {
  Scratch s("det");
  json doc = lorenz_doc(s.dir() / "a");
  doc["ensemble"] = 3;
  REQUIRE(invoke("run", s.write("a.json", doc)).code == kExitOk);
  doc["output_dir"] = (s.dir() / "b").string();
  REQUIRE(invoke("run", s.write("b.json", doc)).code == kExitOk);
  doc["output_dir"] = (s.dir() / "c").string();
  doc["threads"] = 2;
  REQUIRE(invoke("run", s.write("c.json", doc)).code == kExitOk);
  for (const char* file : {"summary.json", "segments.csv", "adjoint.csv", "members.csv"}) {
    const std::string a = slurp(s.dir() / "a" / file);
    CHECK(!a.empty());
    CHECK(a == slurp(s.dir() / "b" / file));
    CHECK(a == slurp(s.dir() / "c" / file));
  }
  const std::string csv = slurp(s.dir() / "a" / "segments.csv");
  CHECK(csv.rfind("# config_hash=", 0) == 0);
  const json summary = json::parse(slurp(s.dir() / "a" / "summary.json"));
  CHECK(summary["derived"]["K"] == 20);
  CHECK(summary["ensemble"]["samples"] == 3);
}

TEST_CASE("divergence exits with the numerical code and a JSON diagnostic") {
  Scratch s("div");
  json doc = lorenz_doc(s.dir() / "out");
  doc["march"] = {{"T", 10}, {"segment", 1}, {"dt", 0.5}, {"m", 1}, {"spinup_initial", 0}, {"spinup_final", 0}};
  const Outcome r = invoke("run", s.write("c.json", doc));
  CHECK(r.code == kExitNumerical);
  const auto brace = r.err.find('{');
  REQUIRE(brace != std::string::npos);
  const json diag = json::parse(r.err.substr(brace));
  CHECK(diag["error"] == "IntegrationDiverged");
}

TEST_CASE("dry run writes nothing") {
  Scratch s("dry");
  const Outcome r = invoke("run", s.write("c.json", lorenz_doc(s.dir() / "out")), {.dry_run = true});
  CHECK(r.code == kExitOk);
  CHECK(!fs::exists(s.dir() / "out"));
  const json d = json::parse(r.out);
  CHECK(d["K"] == 20);
  CHECK(d["N"] == 400);
  CHECK(d["output_dir"] == (s.dir() / "out").string());
}

TEST_CASE("a one-point convergence study is rejected") {
  Scratch s("study");
  json doc = lorenz_doc(s.dir() / "out");
  doc["study"] = {{"mode", "T"}, {"values", {4}}, {"reference", 1}};
  CHECK(invoke("converge", s.write("c.json", doc)).code == kExitInvalidConfig);
  doc["study"] = {{"mode", "T"}, {"values", {4, 2, 8}}, {"reference", 1}};
  CHECK(invoke("converge", s.write("d.json", doc)).code == kExitInvalidConfig);
}

TEST_CASE("converge self-test") {
  std::ostringstream out;
  CHECK(converge_self_test(out));
  CHECK(invoke("converge", "", {.self_test = true}).code == kExitOk);
}

TEST_CASE("lyapunov with a single tracked mode") {
  Scratch s("lyap");
  const Outcome r = invoke("lyapunov", s.write("c.json", lorenz_doc(s.dir() / "out")));
  REQUIRE(r.code == kExitOk);
  std::istringstream csv(slurp(s.dir() / "out" / "spectrum.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 2);  // header plus one exponent
}

TEST_CASE("oracle skips the dense check beyond its bound") {
  Scratch s("oracle");
  const json doc{{"system", {{"type", "ks"}, {"length", 32}}},
                 {"march",
                  {{"T", 101},
                   {"segment", 1},
                   {"dt", 0.025},
                   {"m", 20},
                   {"spinup_initial", 10},
                   {"spinup_final", 5}}},
                 {"oracle", {{"window", 2}, {"spinup", 1}, {"ensemble", 2}, {"delta_s", 0.1}}},
                 {"output_dir", (s.dir() / "out").string()}};
  const Outcome r = invoke("oracle", s.write("c.json", doc));
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("dense oracle skipped: K*m = 2020 exceeds the dense bound 2000") != std::string::npos);
}

TEST_CASE("unreadable config exits with the invalid-config code") {
  Scratch s("bad");
  const fs::path p = s.dir() / "broken.json";
  std::ofstream(p) << "{ not json";
  CHECK(invoke("run", p).code == kExitInvalidConfig);
  CHECK(invoke("run", s.dir() / "missing.json").code == kExitInvalidConfig);
  CHECK(invoke("bogus", p).code == kExitInvalidConfig);
}
