#include "digitfrac/cli.hpp"
#include "digitfrac/counting.hpp"
#include "digitfrac/error.hpp"
#include "digitfrac/fourier.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace digitfrac;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "digitfrac");
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / ("digitfrac_test_" + name);
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("dim and validate") {
  auto r = invoke({"--system", "cantor", "dim"});
  CHECK(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["hausdorff_dimension"].get<double>() == doctest::Approx(0.6309297535714574));
  CHECK(j["proper"].get<bool>());

  auto path = temp_file("cantor.json", R"({"base": 3, "dim": 1, "digits": [[0], [2]]})");
  auto v = invoke({"--system", path.string(), "validate"});
  CHECK(v.code == 0);
  CHECK(nlohmann::json::parse(v.out)["proper"].get<bool>());
}

TEST_CASE("built-in systems") {
  CHECK(cli::load_system("cantor") == cantor_system());
  CHECK(cli::load_system("slab:10:5:2") == slab_system(10, 5, 2));
  CHECK(cli::load_system("lebesgue:2:2") == lebesgue_system(2, 2));
  CHECK_THROWS_AS(cli::load_system("slab:4:4:1"), Error);
  auto bad = temp_file("bad.json", "{\"base\": 3, ");
  try {
    cli::load_system(bad.string());
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  CHECK(invoke({"--system", bad.string(), "dim"}).code == 2);
  auto invalid = temp_file("invalid.json", R"({"base": 3, "dim": 1, "digits": [[0], [3]]})");
  CHECK(invoke({"--system", invalid.string(), "dim"}).code == 2);
}

TEST_CASE("l1bound matches the library byte for byte") {
  auto r = invoke({"--system", "cantor", "l1bound", "--L", "2", "--grid", "1e-4"});
  CHECK(r.code == 0);
  CHECK(r.out == to_json(l1_lower_bound(cantor_system(), 2, 1e-4)).dump(2) + "\n");
}

TEST_CASE("count csv") {
  auto r = invoke({"--system", "cantor", "count", "--Q", "3", "--delta", "0"});
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::string meta, header, row;
  std::getline(in, meta);
  std::getline(in, header);
  std::getline(in, row);
  CHECK(meta.rfind("# digitfrac version=", 0) == 0);
  CHECK(meta.find("system_hash=" + system_hash(cantor_system())) != std::string::npos);
  CHECK(meta.find("seed=") != std::string::npos);
  CHECK(header == "Q,delta,count,heuristic,ratio,exact");
  CHECK(row.rfind("3,0,8,", 0) == 0);
}

TEST_CASE("every series command writes meta and header") {
  const std::vector<std::vector<std::string>> runs = {
      {"--system", "cantor", "l1sum", "--Q", "9"},
      {"--system", "cantor", "khinchin", "--psi", "power_t:2", "--N", "10"},
      {"--system", "cantor", "khinchin", "--psi", "power_t:2", "--N", "10", "--lebesgue"},
      {"--system", "lebesgue:2:2", "gallagher", "--psi", "power_t:1", "--N", "10"},
      {"--system", "cantor", "--seed", "3", "khinchin", "--psi", "power_t:2", "--j0", "2", "--j1", "3",
       "--samples", "200"},
      {"--system", "cantor", "intrinsic", "--x", "1/4", "--tau", "1", "--Q", "20"},
  };
  for (const auto& args : runs) {
    auto r = invoke(args);
    CHECK(r.code == 0);
    CHECK(r.out.rfind("# digitfrac version=", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') >= 2);
  }
}

TEST_CASE("exit codes") {
  CHECK(invoke({"--system", "cantor", "frobnicate"}).code == 2);
  CHECK(invoke({"--system", "cantor", "count", "--Q", "x"}).code == 2);
  CHECK(invoke({"dim"}).code == 2);
  CHECK(invoke({"--system", "cantor", "fourier-coeff", "--xi", "5", "--tol", "1e-300"}).code == 3);
  CHECK(invoke({}).code == 2);
  auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("count") != std::string::npos);
}

TEST_CASE("config files") {
  cli::ExperimentConfig cfg;
  cfg.system = "cantor";
  cfg.command = "count";
  cfg.params = {{"Q", "5"}, {"delta", "Q^{-1/2}"}};
  cfg.seed = 9;
  cfg.threads = 2;
  auto back = cli::ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  auto path = temp_file("config.json", cfg.to_json().dump());
  auto from_file = invoke({"--config", path.string()});
  auto direct = invoke({"--system", "cantor", "--seed", "9", "count", "--Q", "5", "--delta", "Q^{-1/2}"});
  CHECK(from_file.code == 0);
  CHECK(from_file.out == direct.out);

  nlohmann::json extra = cfg.to_json();
  extra["colour"] = "blue";
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json(extra), Error);
  auto bad_path = temp_file("extra.json", extra.dump());
  CHECK(invoke({"--config", bad_path.string()}).code == 2);

  nlohmann::json bad_param = cfg.to_json();
  bad_param["params"]["gamma"] = "1";
  auto bp = temp_file("bad_param.json", bad_param.dump());
  CHECK(invoke({"--config", bp.string()}).code == 2);
}

TEST_CASE("output file") {
  auto target = std::filesystem::temp_directory_path() / "digitfrac_test_out.json";
  std::filesystem::remove(target);
  auto r = invoke({"--system", "cantor", "--output", target.string(), "dim"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(target);
  std::stringstream body;
  body << in.rdbuf();
  CHECK(body.str() == invoke({"--system", "cantor", "dim"}).out);
}

TEST_CASE("thread count does not change output") {
  const std::vector<std::vector<std::string>> runs = {
      {"l1sum", "--Q", "40"},
      {"l1bound", "--L", "2", "--grid", "1e-3"},
      {"count", "--Q", "30", "--delta", "Q^{-1/2}"},
      {"khinchin", "--psi", "power_t:2", "--j0", "3", "--j1", "5", "--samples", "500"},
      {"gallagher", "--psi", "power_t:1", "--N", "12"},
  };
  for (const auto& args : runs) {
    std::string first;
    for (const char* t : {"1", "2", "8"}) {
      std::vector<std::string> full{"--system", "cantor", "--seed", "5", "--threads", t};
      full.insert(full.end(), args.begin(), args.end());
      auto r = invoke(full);
      CHECK(r.code == 0);
      if (first.empty()) first = r.out;
      CHECK(r.out == first);
    }
  }
}

}  // TEST_SUITE
