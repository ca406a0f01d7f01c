#include "psopf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psopf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double as_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("setting '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long as_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("setting '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const char* const kKeys[] = {"n_particles", "c1", "c2", "w_max", "w_min", "iter_max",
                             "v_max_fraction", "stagnation_window", "stagnation_digits", "seed",
                             "threads", "lambda", "lambda_p", "lambda_v", "lambda_q", "lambda_s",
                             "pf_tol", "pf_max_iter"};

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key or value");
    }
    out[key] = value;
  }
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto& p = cfg.pso;
  auto& q = cfg.penalty;
  if (key == "n_particles") p.n_particles = static_cast<int>(as_integer(key, value));
  else if (key == "c1") p.c1 = as_double(key, value);
  else if (key == "c2") p.c2 = as_double(key, value);
  else if (key == "w_max") p.w_max = as_double(key, value);
  else if (key == "w_min") p.w_min = as_double(key, value);
  else if (key == "iter_max") p.iter_max = static_cast<int>(as_integer(key, value));
  else if (key == "v_max_fraction") p.v_max_fraction = as_double(key, value);
  else if (key == "stagnation_window") p.stagnation_window = static_cast<int>(as_integer(key, value));
  else if (key == "stagnation_digits") p.stagnation_digits = static_cast<int>(as_integer(key, value));
  else if (key == "seed") p.seed = static_cast<std::uint64_t>(as_integer(key, value));
  else if (key == "threads") p.threads = static_cast<int>(as_integer(key, value));
  else if (key == "lambda") q.lambda = as_double(key, value);
  else if (key == "lambda_p") q.lambda_p = as_double(key, value);
  else if (key == "lambda_v") q.lambda_v = as_double(key, value);
  else if (key == "lambda_q") q.lambda_q = as_double(key, value);
  else if (key == "lambda_s") q.lambda_s = as_double(key, value);
  else if (key == "pf_tol") cfg.powerflow.tol = as_double(key, value);
  else if (key == "pf_max_iter") cfg.powerflow.max_iter = static_cast<int>(as_integer(key, value));
  else throw std::invalid_argument("unknown setting '" + key + "'");
}

RunConfig load_config(std::string_view text) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) apply_setting(cfg, k, v);
  cfg.pso.validate();
  cfg.penalty.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::map<std::string, std::string> apply_env_overrides(RunConfig& cfg) {
  std::map<std::string, std::string> applied;
  for (const char* key : kKeys) {
    std::string env(kEnvPrefix);
    for (const char* c = key; *c; ++c) env.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(*c))));
    if (const char* v = std::getenv(env.c_str())) {
      apply_setting(cfg, key, trim(v));
      applied[key] = trim(v);
    }
  }
  cfg.pso.validate();
  cfg.penalty.validate();
  return applied;
}

std::map<std::string, std::string> config_entries(const RunConfig& cfg) {
  const auto& p = cfg.pso;
  const auto& q = cfg.penalty;
  return {
      {"n_particles", std::to_string(p.n_particles)},
      {"c1", fmt(p.c1)},
      {"c2", fmt(p.c2)},
      {"w_max", fmt(p.w_max)},
      {"w_min", fmt(p.w_min)},
      {"iter_max", std::to_string(p.iter_max)},
      {"v_max_fraction", fmt(p.v_max_fraction)},
      {"stagnation_window", std::to_string(p.stagnation_window)},
      {"stagnation_digits", std::to_string(p.stagnation_digits)},
      {"seed", std::to_string(p.seed)},
      {"threads", std::to_string(p.threads)},
      {"lambda", fmt(q.lambda)},
      {"lambda_p", fmt(q.lambda_p)},
      {"lambda_v", fmt(q.lambda_v)},
      {"lambda_q", fmt(q.lambda_q)},
      {"lambda_s", fmt(q.lambda_s)},
      {"pf_tol", fmt(cfg.powerflow.tol)},
      {"pf_max_iter", std::to_string(cfg.powerflow.max_iter)},
  };
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace psopf
