#include "digitfrac/cli.hpp"

#include "digitfrac/approx.hpp"
#include "digitfrac/counting.hpp"
#include "digitfrac/error.hpp"
#include "digitfrac/fourier.hpp"
#include "digitfrac/measure.hpp"
#include "digitfrac/parallel.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace digitfrac::cli {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return parts;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "--" + key + " expects an integer, got '" + text + "'");
  }
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    try {
      return to_double(parse_rational(text));
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, "--" + key + " expects a number, got '" + text + "'");
    }
  }
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<std::int64_t> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_int(key, p));
  if (out.empty()) throw Error(ErrorCode::ParseError, "--" + key + " is empty");
  return out;
}

RationalVector parse_rational_list(const std::string& key, const std::string& text) {
  RationalVector out;
  for (const auto& p : split(text, ',')) {
    try {
      out.push_back(parse_rational(p));
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, "--" + key + " expects rationals, got '" + p + "'");
    }
  }
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::map<std::string, std::vector<std::string>>& param_table() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"validate", {}},
      {"dim", {}},
      {"fourier-coeff", {"xi", "tol"}},
      {"l1sum", {"Q", "tol"}},
      {"l1bound", {"L", "grid"}},
      {"count", {"Q", "delta", "budget"}},
      {"slab", {"b", "a", "k", "Q"}},
      {"khinchin", {"psi", "y", "N", "first-n", "lebesgue", "j0", "j1", "samples", "mode"}},
      {"gallagher", {"psi", "y", "N", "first-n", "j0", "j1", "samples"}},
      {"intrinsic", {"x", "tau", "Q"}},
  };
  return table;
}

const std::set<std::string>& flag_params() {
  static const std::set<std::string> flags{"lebesgue"};
  return flags;
}

class Params {
 public:
  Params(const std::string& command, const std::map<std::string, std::string>& values)
      : command_(command), values_(values) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorCode::InvalidArgument, command_ + " needs --" + key);
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }
  std::int64_t integer(const std::string& key) const { return parse_int(key, str(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  double real(const std::string& key, double fallback) const {
    return has(key) ? parse_real(key, str(key)) : fallback;
  }
  bool flag(const std::string& key) const {
    if (!has(key)) return false;
    const std::string& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(ErrorCode::ParseError, "--" + key + " expects true or false");
  }

  std::string summary() const {
    std::string s;
    for (const auto& [k, v] : values_) {
      if (!s.empty()) s += ';';
      s += k + "=" + v;
    }
    return s;
  }

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

std::string json_value_to_param(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) {
      if (!s.empty()) s += ',';
      s += json_value_to_param(e);
    }
    return s;
  }
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::ParseError, "unsupported parameter value " + v.dump());
}

void write_csv_meta(std::ostream& out, const DigitSystem& sys, std::uint64_t seed,
                    const std::string& command, const Params& params) {
  out << "# digitfrac version=" << DIGITFRAC_VERSION << " system_hash=" << system_hash(sys)
      << " seed=" << seed << " command=" << command << " params=" << params.summary() << "\n";
}

RationalVector shift_for(const Params& p, int dim) {
  if (!p.has("y")) return RationalVector(static_cast<std::size_t>(dim), Rational(0));
  RationalVector y = parse_rational_list("y", p.str("y"));
  if (y.size() == 1 && dim > 1) y.assign(static_cast<std::size_t>(dim), y[0]);
  if (static_cast<int>(y.size()) != dim) {
    throw Error(ErrorCode::DimensionMismatch, "--y needs one value per coordinate");
  }
  return y;
}

void limsup_windows(std::ostream& out, const DigitSystem& sys, const ApproxFunction& f,
                    const RationalVector& y, const Params& p, std::uint64_t seed, ApproxMode mode,
                    int threads) {
  const auto j0 = p.integer("j0");
  const auto j1 = p.integer("j1", j0);
  const auto samples = p.integer("samples", 10000);
  if (j0 < 0 || j1 < j0 || j1 > 40) throw Error(ErrorCode::InvalidArgument, "need 0 <= j0 <= j1 <= 40");
  out << "window,fraction,ci_lo,ci_hi\n";
  for (auto j = j0; j <= j1; ++j) {
    const std::int64_t N0 = std::int64_t{1} << j;
    LimsupEstimate e = limsup_fraction(sys, f, y, N0, 2 * N0, samples, seed, mode, threads);
    out << j << ',' << fmt(e.fraction) << ',' << fmt(e.ci_lo) << ',' << fmt(e.ci_hi) << '\n';
  }
}

}  // namespace

DigitSystem load_system(const std::string& spec) {
  DigitSystem sys;
  const auto parts = split(spec, ':');
  if (spec == "cantor") {
    sys = cantor_system();
  } else if (!parts.empty() && parts[0] == "lebesgue" && parts.size() == 3) {
    sys = lebesgue_system(static_cast<int>(parse_int("system", parts[1])),
                          static_cast<int>(parse_int("system", parts[2])));
  } else if (!parts.empty() && parts[0] == "slab" && parts.size() == 4) {
    sys = slab_system(static_cast<int>(parse_int("system", parts[1])),
                      static_cast<int>(parse_int("system", parts[2])),
                      static_cast<int>(parse_int("system", parts[3])));
  } else {
    std::ifstream in(spec);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open system file '" + spec + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "malformed system JSON: " + std::string(e.what()));
    }
    return load_system(j);
  }
  validate(sys);
  return sys;
}

DigitSystem load_system(const nlohmann::json& spec) {
  if (spec.is_string()) return load_system(spec.get<std::string>());
  DigitSystem sys = system_from_json(spec);
  try {
    validate(sys);
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, e.what());
  }
  return sys;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : param_table()) v.push_back(k);
    return v;
  }();
  return names;
}

const std::vector<std::string>& command_params(const std::string& command) {
  auto it = param_table().find(command);
  if (it == param_table().end()) throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
  return it->second;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  static const std::set<std::string> known{"system", "command", "params", "seed", "threads", "output"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw Error(ErrorCode::ParseError, "unknown config field '" + it.key() + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("system")) c.system = j.at("system");
    if (j.contains("command")) c.command = j.at("command").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("params")) {
      const auto& p = j.at("params");
      if (!p.is_object()) throw Error(ErrorCode::ParseError, "params must be an object");
      for (auto it = p.begin(); it != p.end(); ++it) c.params[it.key()] = json_value_to_param(it.value());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!c.command.empty()) {
    const auto& allowed = command_params(c.command);
    for (const auto& [k, _] : c.params) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        throw Error(ErrorCode::ParseError, "unknown parameter '" + k + "' for " + c.command);
      }
    }
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (!system.is_null()) j["system"] = system;
  if (!command.empty()) j["command"] = command;
  if (!params.empty()) j["params"] = params;
  if (seed) j["seed"] = *seed;
  if (threads) j["threads"] = *threads;
  if (output) j["output"] = *output;
  return j;
}

void execute(const ExperimentConfig& config, std::ostream& out) {
  const std::string& cmd = config.command;
  const auto& allowed = command_params(cmd);
  for (const auto& [k, _] : config.params) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown parameter '" + k + "' for " + cmd);
    }
  }
  const Params p(cmd, config.params);
  const std::uint64_t seed = config.seed.value_or(0);
  const int threads = resolve_threads(config.threads.value_or(0));

  if (cmd == "slab") {
    DigitSystem sys = slab_system(static_cast<int>(p.integer("b")), static_cast<int>(p.integer("a")),
                                  static_cast<int>(p.integer("k")));
    nlohmann::json j;
    j["system"] = to_json(sys);
    j["hausdorff_dimension"] = hausdorff_dimension(sys);
    j["proper"] = validate(sys).proper;
    if (p.has("Q")) {
      const auto Q = p.integer("Q");
      CountOptions co;
      co.threads = threads;
      j["count_on"] = count_on(sys, Q, co);
      BigInt floor_sum = 0;
      for (std::int64_t q = 1; q <= Q; ++q) {
        BigInt term;
        mpz_ui_pow_ui(term.get_mpz_t(), static_cast<unsigned long>(q + 1), static_cast<unsigned long>(sys.dim - 1));
        floor_sum += term;
      }
      j["slab_lower_bound"] = nlohmann::json::parse(floor_sum.get_str());
    }
    out << j.dump(2) << "\n";
    return;
  }

  if (config.system.is_null()) throw Error(ErrorCode::InvalidArgument, cmd + " needs --system");
  const DigitSystem sys = load_system(config.system);

  if (cmd == "validate") {
    nlohmann::json j;
    j["valid"] = true;
    j["proper"] = validate(sys).proper;
    j["base"] = sys.base;
    j["dim"] = sys.dim;
    j["digits"] = sys.size();
    j["system_hash"] = system_hash(sys);
    out << j.dump(2) << "\n";
  } else if (cmd == "dim") {
    nlohmann::json j;
    j["hausdorff_dimension"] = hausdorff_dimension(sys);
    j["proper"] = validate(sys).proper;
    out << j.dump(2) << "\n";
  } else if (cmd == "fourier-coeff") {
    std::vector<std::int64_t> xi = parse_int_list("xi", p.str("xi"));
    CertifiedComplex v = mu_hat(sys, xi, p.real("tol", 1e-12));
    nlohmann::json j;
    j["xi"] = xi;
    j["re"] = v.value.real();
    j["im"] = v.value.imag();
    j["abs"] = std::abs(v.value);
    j["err"] = v.err;
    j["depth"] = v.depth;
    out << j.dump(2) << "\n";
  } else if (cmd == "l1sum") {
    const auto Qs = parse_int_list("Q", p.str("Q"));
    L1SumOptions lo;
    lo.threads = threads;
    write_csv_meta(out, sys, seed, cmd, p);
    out << "Q,partial_sum,err\n";
    for (auto Q : Qs) {
      if (Q < 0 || Q > std::numeric_limits<int>::max()) throw Error(ErrorCode::InvalidArgument, "bad Q");
      CertifiedValue v = l1_partial_sum(sys, static_cast<int>(Q), p.real("tol", 1e-12), lo);
      out << Q << ',' << fmt(v.value) << ',' << fmt(v.err) << '\n';
    }
  } else if (cmd == "l1bound") {
    L1BoundReport r = l1_lower_bound(sys, static_cast<int>(p.integer("L")), p.real("grid", 1e-4), threads);
    out << to_json(r).dump(2) << "\n";
  } else if (cmd == "count") {
    const auto Qs = parse_int_list("Q", p.str("Q"));
    const DeltaSpec delta = DeltaSpec::parse(p.str("delta", "0"));
    CountOptions co;
    co.threads = threads;
    co.node_budget = static_cast<std::uint64_t>(p.integer("budget", static_cast<std::int64_t>(co.node_budget)));
    write_csv_meta(out, sys, seed, cmd, p);
    out << "Q,delta,count,heuristic,ratio,exact\n";
    for (auto Q : Qs) {
      const Rational d = delta.resolve(Q);
      CountResult r = count_near(sys, CountQuery{Q, d}, co);
      out << Q << ',' << to_string(d) << ',' << r.count << ',' << fmt(r.heuristic) << ','
          << fmt(r.ratio) << ',' << (r.exact ? "true" : "false") << '\n';
    }
  } else if (cmd == "khinchin" || cmd == "gallagher") {
    const ApproxFunction f = ApproxFunction::parse(p.str("psi"));
    const RationalVector y = shift_for(p, sys.dim);
    SumOptions so;
    so.threads = threads;
    so.first_n = p.integer("first-n", 2);
    write_csv_meta(out, sys, seed, cmd, p);
    if (p.has("j0")) {
      ApproxMode mode = cmd == "gallagher" ? ApproxMode::Mult : parse_mode(p.str("mode", "sim"));
      limsup_windows(out, sys, f, y, p, seed, mode, threads);
      return;
    }
    const auto N = p.integer("N", 64);
    if (cmd == "khinchin" && p.flag("lebesgue")) {
      auto sums = khinchin_sum_lebesgue(f, sys.dim, N, so);
      out << "n,term,partial_sum\n";
      Rational prev = 0;
      for (std::size_t i = 0; i < sums.size(); ++i) {
        out << so.first_n + static_cast<std::int64_t>(i) << ',' << fmt(to_double(sums[i] - prev)) << ','
            << fmt(to_double(sums[i])) << '\n';
        prev = sums[i];
      }
    } else if (cmd == "khinchin") {
      MeasureSeries s = khinchin_sum_mu(sys, f, y, N, so);
      out << "n,term,partial_sum,exact\n";
      for (std::size_t i = 0; i < s.n.size(); ++i) {
        const bool ex = s.term_lo[i] == s.term_hi[i];
        out << s.n[i] << ',' << fmt(to_double((s.term_lo[i] + s.term_hi[i]) / 2)) << ','
            << fmt(to_double((s.partial_lo[i] + s.partial_hi[i]) / 2)) << ',' << (ex ? "true" : "false")
            << '\n';
      }
    } else {
      GallagherSeries g = gallagher_sum_mu(sys, f, y, N, so);
      out << "n,lower_term,upper_term,lower_partial,upper_partial\n";
      for (std::size_t i = 0; i < g.lower.n.size(); ++i) {
        out << g.lower.n[i] << ',' << fmt(to_double(g.lower.term_lo[i])) << ','
            << fmt(to_double(g.upper.term_hi[i])) << ',' << fmt(to_double(g.lower.partial_lo[i])) << ','
            << fmt(to_double(g.upper.partial_hi[i])) << '\n';
      }
    }
  } else if (cmd == "intrinsic") {
    const RationalVector x = parse_rational_list("x", p.str("x"));
    auto found = intrinsic_hits(sys, x, p.real("tau", 1.0), p.integer("Q"));
    write_csv_meta(out, sys, seed, cmd, p);
    out << "n";
    for (std::size_t j = 0; j < x.size(); ++j) out << ",a_" << j + 1;
    out << '\n';
    for (const auto& h : found) {
      out << h.n;
      for (auto a : h.a) out << ',' << a;
      out << '\n';
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown command '" + cmd + "'");
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"digitfrac: missing-digit fractals, Fourier bounds, rational points and approximation"};
  app.require_subcommand(0, 1);
  std::string config_path, system_spec, output_path;
  std::uint64_t seed = 0;
  int threads = 0;
  auto* opt_config = app.add_option("--config", config_path, "experiment config JSON");
  auto* opt_system = app.add_option("--system", system_spec, "system JSON path or built-in name");
  auto* opt_seed = app.add_option("--seed", seed, "random seed");
  auto* opt_threads = app.add_option("--threads", threads, "worker threads (default DIGITFRAC_THREADS or 1)");
  auto* opt_output = app.add_option("--output", output_path, "write results here instead of stdout");
  (void)opt_config;

  std::map<std::string, std::map<std::string, std::string>> storage;
  std::map<std::string, std::map<std::string, bool>> flag_storage;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  std::map<std::string, CLI::App*> subs;
  static const std::map<std::string, std::string> blurbs = {
      {"validate", "check a digit system"},
      {"dim", "Hausdorff dimension"},
      {"fourier-coeff", "certified Fourier coefficient at an integer frequency"},
      {"l1sum", "l1 partial sums of the Fourier transform"},
      {"l1bound", "certified lower bound for the Fourier l1 dimension"},
      {"count", "rational points on or near the fractal"},
      {"slab", "rational point counts on a slab fractal"},
      {"khinchin", "Khinchin measure sums or limsup estimates"},
      {"gallagher", "Gallagher sandwich sums or limsup estimates"},
      {"intrinsic", "rational approximations lying on the fractal"},
  };
  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, blurbs.count(name) ? blurbs.at(name) : "");
    sub->fallthrough();
    subs[name] = sub;
    for (const auto& key : command_params(name)) {
      CLI::Option* o;
      if (flag_params().count(key)) {
        o = sub->add_flag("--" + key, flag_storage[name][key]);
      } else {
        o = sub->add_option("--" + key, storage[name][key]);
      }
      options[name].emplace_back(key, o);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::ParseError, "cannot open config '" + config_path + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, "malformed config JSON: " + std::string(e.what()));
      }
      cfg = ExperimentConfig::from_json(j);
    }
    std::string chosen;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) chosen = name;
    }
    if (!chosen.empty()) {
      if (!cfg.command.empty() && cfg.command != chosen) {
        throw Error(ErrorCode::InvalidArgument,
                    "config command '" + cfg.command + "' differs from subcommand '" + chosen + "'");
      }
      cfg.command = chosen;
      for (const auto& [key, o] : options[chosen]) {
        if (o->count() == 0) continue;
        if (flag_params().count(key)) {
          cfg.params[key] = flag_storage[chosen][key] ? "true" : "false";
        } else {
          cfg.params[key] = storage[chosen][key];
        }
      }
    }
    if (cfg.command.empty()) {
      err << app.help();
      return 2;
    }
    if (opt_system->count()) cfg.system = system_spec;
    if (opt_seed->count()) cfg.seed = seed;
    if (opt_threads->count()) cfg.threads = threads;
    if (opt_output->count()) cfg.output = output_path;

    std::ostringstream buffer;
    execute(cfg, buffer);
    if (cfg.output && !cfg.output->empty()) {
      std::ofstream file(*cfg.output, std::ios::binary);
      if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write '" + *cfg.output + "'");
      file << buffer.str();
    } else {
      out << buffer.str();
    }
    return 0;
  } catch (const Error& e) {
    err << "digitfrac: " << e.what() << "\n";
    return is_budget_error(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    err << "digitfrac: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace digitfrac::cli
