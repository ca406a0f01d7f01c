#include "psopf/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace psopf {

std::size_t Network::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw std::out_of_range("unknown bus id " + std::to_string(id));
}

std::size_t Network::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind == BusKind::Slack) return i;
  }
  throw ValidationError("network has no slack bus");
}

int Network::generator_at(std::size_t bus_pos) const {
  const int id = buses.at(bus_pos).id;
  for (std::size_t g = 0; g < generators.size(); ++g) {
    if (generators[g].bus == id) return static_cast<int>(g);
  }
  return -1;
}

double Network::total_p_demand() const noexcept {
  return std::accumulate(buses.begin(), buses.end(), 0.0,
                         [](double acc, const Bus& b) { return acc + b.p_demand; });
}

namespace {

enum class Section { None, BaseMva, Bus, Branch, Generator, Shunt };

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

int to_int(std::string_view tok, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

BusKind to_kind(std::string_view tok, std::size_t line) {
  if (tok == "slack") return BusKind::Slack;
  if (tok == "pv") return BusKind::Generator;
  if (tok == "pq") return BusKind::Load;
  throw ParseError(line, "unknown bus kind '" + std::string(tok) + "'");
}

std::string_view kind_token(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "slack";
    case BusKind::Generator: return "pv";
    case BusKind::Load: return "pq";
  }
  return "pq";
}

void expect_fields(const std::vector<std::string_view>& f, std::size_t n, std::size_t line,
                   const char* section) {
  if (f.size() != n) {
    throw ParseError(line, std::string(section) + " record needs " + std::to_string(n) +
                               " fields, got " + std::to_string(f.size()));
  }
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Network parse_case(std::string_view text) {
  Network net;
  Section section = Section::None;
  bool have_base = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto f = split_fields(line);
    if (f.empty()) continue;

    if (f.size() == 1 && f[0].front() == '[') {
      if (f[0] == "[BASE_MVA]") section = Section::BaseMva;
      else if (f[0] == "[BUS]") section = Section::Bus;
      else if (f[0] == "[BRANCH]") section = Section::Branch;
      else if (f[0] == "[GENERATOR]") section = Section::Generator;
      else if (f[0] == "[SHUNT]") section = Section::Shunt;
      else throw ParseError(line_no, "unknown section " + std::string(f[0]));
      continue;
    }

    switch (section) {
      case Section::None:
        throw ParseError(line_no, "record outside of any section");
      case Section::BaseMva:
        expect_fields(f, 1, line_no, "BASE_MVA");
        if (have_base) throw ParseError(line_no, "duplicate base MVA");
        net.base_mva = to_double(f[0], line_no);
        if (!(net.base_mva > 0.0)) throw ParseError(line_no, "base MVA must be positive");
        have_base = true;
        break;
      case Section::Bus: {
        expect_fields(f, 8, line_no, "BUS");
        Bus b;
        b.id = to_int(f[0], line_no);
        b.kind = to_kind(f[1], line_no);
        b.p_demand = to_double(f[2], line_no);
        b.q_demand = to_double(f[3], line_no);
        b.v_mag = to_double(f[4], line_no);
        b.v_angle = to_double(f[5], line_no);
        b.v_min = to_double(f[6], line_no);
        b.v_max = to_double(f[7], line_no);
        net.buses.push_back(b);
        break;
      }
      case Section::Branch: {
        expect_fields(f, 9, line_no, "BRANCH");
        Branch br;
        br.from_bus = to_int(f[0], line_no);
        br.to_bus = to_int(f[1], line_no);
        br.r = to_double(f[2], line_no);
        br.x = to_double(f[3], line_no);
        br.b_total = to_double(f[4], line_no);
        br.tap_ratio = to_double(f[5], line_no);
        const bool no_min = f[6] == "-";
        const bool no_max = f[7] == "-";
        if (no_min != no_max) throw ParseError(line_no, "tap bounds must be both given or both '-'");
        if (!no_min) br.tap = TapBounds{to_double(f[6], line_no), to_double(f[7], line_no)};
        br.s_rating = to_double(f[8], line_no);
        net.branches.push_back(br);
        break;
      }
      case Section::Generator: {
        expect_fields(f, 11, line_no, "GENERATOR");
        Generator g;
        g.bus = to_int(f[0], line_no);
        g.p_out = to_double(f[1], line_no);
        g.q_out = to_double(f[2], line_no);
        g.p_min = to_double(f[3], line_no);
        g.p_max = to_double(f[4], line_no);
        g.q_min = to_double(f[5], line_no);
        g.q_max = to_double(f[6], line_no);
        g.v_setpoint = to_double(f[7], line_no);
        g.cost_a = to_double(f[8], line_no);
        g.cost_b = to_double(f[9], line_no);
        g.cost_c = to_double(f[10], line_no);
        net.generators.push_back(g);
        break;
      }
      case Section::Shunt: {
        expect_fields(f, 4, line_no, "SHUNT");
        ShuntCompensator s;
        s.bus = to_int(f[0], line_no);
        s.q_injection = to_double(f[1], line_no);
        s.q_min = to_double(f[2], line_no);
        s.q_max = to_double(f[3], line_no);
        net.shunts.push_back(s);
        break;
      }
    }
  }
  validate(net);
  return net;
}

Network load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string serialize_case(const Network& net) {
  std::ostringstream out;
  out << "[BASE_MVA]\n" << fmt(net.base_mva) << "\n\n";
  out << "[BUS]\n# id kind p_demand q_demand v_mag v_angle v_min v_max\n";
  for (const auto& b : net.buses) {
    out << b.id << ' ' << kind_token(b.kind) << ' ' << fmt(b.p_demand) << ' ' << fmt(b.q_demand)
        << ' ' << fmt(b.v_mag) << ' ' << fmt(b.v_angle) << ' ' << fmt(b.v_min) << ' '
        << fmt(b.v_max) << '\n';
  }
  out << "\n[BRANCH]\n# from_bus to_bus r x b_total tap_ratio tap_min tap_max s_rating\n";
  for (const auto& br : net.branches) {
    out << br.from_bus << ' ' << br.to_bus << ' ' << fmt(br.r) << ' ' << fmt(br.x) << ' '
        << fmt(br.b_total) << ' ' << fmt(br.tap_ratio) << ' ';
    if (br.tap) out << fmt(br.tap->min) << ' ' << fmt(br.tap->max);
    else out << "- -";
    out << ' ' << fmt(br.s_rating) << '\n';
  }
  out << "\n[GENERATOR]\n# bus p_out q_out p_min p_max q_min q_max v_setpoint cost_a cost_b cost_c\n";
  for (const auto& g : net.generators) {
    out << g.bus << ' ' << fmt(g.p_out) << ' ' << fmt(g.q_out) << ' ' << fmt(g.p_min) << ' '
        << fmt(g.p_max) << ' ' << fmt(g.q_min) << ' ' << fmt(g.q_max) << ' ' << fmt(g.v_setpoint)
        << ' ' << fmt(g.cost_a) << ' ' << fmt(g.cost_b) << ' ' << fmt(g.cost_c) << '\n';
  }
  out << "\n[SHUNT]\n# bus q_injection q_min q_max\n";
  for (const auto& s : net.shunts) {
    out << s.bus << ' ' << fmt(s.q_injection) << ' ' << fmt(s.q_min) << ' ' << fmt(s.q_max)
        << '\n';
  }
  return out.str();
}

void validate(const Network& net) {
  if (net.buses.empty()) throw ValidationError("network has no buses");
  if (!(net.base_mva > 0.0)) throw ValidationError("base MVA must be positive");

  std::set<int> ids;
  int slack_count = 0;
  for (const auto& b : net.buses) {
    if (!ids.insert(b.id).second) throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::Slack) ++slack_count;
    if (!(b.v_min < b.v_max)) {
      throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be below v_max");
    }
  }
  if (slack_count == 0) throw ValidationError("network has no slack bus");
  if (slack_count > 1) throw ValidationError("network has more than one slack bus");

  auto require_bus = [&](int id, const std::string& what) {
    if (!ids.count(id)) throw ValidationError(what + " refers to unknown bus " + std::to_string(id));
  };

  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    const std::string name = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    require_bus(br.from_bus, name);
    require_bus(br.to_bus, name);
    if (br.from_bus == br.to_bus) throw ValidationError(name + " is a self loop");
    if (br.x == 0.0) throw ValidationError(name + " has zero reactance");
    if (!(br.tap_ratio > 0.0)) throw ValidationError(name + " has non-positive tap ratio");
    if (br.tap && !(br.tap->min <= br.tap_ratio && br.tap_ratio <= br.tap->max)) {
      throw ValidationError(name + " tap ratio outside its bounds");
    }
    if (!(br.s_rating > 0.0)) throw ValidationError(name + " needs a positive rating");
  }

  std::set<int> gen_buses;
  for (const auto& g : net.generators) {
    require_bus(g.bus, "generator");
    if (!gen_buses.insert(g.bus).second) {
      throw ValidationError("more than one generator at bus " + std::to_string(g.bus));
    }
    if (!(g.p_min <= g.p_max)) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": p_min > p_max");
    if (!(g.q_min <= g.q_max)) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": q_min > q_max");
    if (g.cost_c < 0.0) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": negative quadratic cost");
  }
  for (const auto& b : net.buses) {
    const bool has_gen = gen_buses.count(b.id) > 0;
    if (b.kind != BusKind::Load && !has_gen) {
      throw ValidationError("bus " + std::to_string(b.id) + " is slack/pv but has no generator");
    }
    if (b.kind == BusKind::Load && has_gen) {
      throw ValidationError("bus " + std::to_string(b.id) + " is pq but has a generator");
    }
  }

  std::set<int> shunt_buses;
  for (const auto& s : net.shunts) {
    require_bus(s.bus, "shunt");
    if (!shunt_buses.insert(s.bus).second) {
      throw ValidationError("more than one shunt compensator at bus " + std::to_string(s.bus));
    }
    if (!(s.q_min <= s.q_injection && s.q_injection <= s.q_max)) {
      throw ValidationError("shunt at bus " + std::to_string(s.bus) + " outside its bounds");
    }
  }

  // Single island: breadth-first search over branches.
  const std::size_t n = net.buses.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& br : net.branches) {
    const auto f = net.bus_index(br.from_bus);
    const auto t = net.bus_index(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  if (reached != n) throw ValidationError("network is not connected");
}

Complex series_admittance(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0) {
    throw ValidationError("zero-impedance branch " + std::to_string(br.from_bus) + "-" +
                          std::to_string(br.to_bus));
  }
  return 1.0 / Complex(br.r, br.x);
}

BranchAdmittance branch_admittance(const Branch& br) {
  const Complex ys = series_admittance(br);
  const Complex charging(0.0, br.b_total / 2.0);
  const double t = br.tap_ratio;
  return {(ys + charging) / (t * t), -ys / t, -ys / t, ys + charging};
}

AdmittanceMatrix build_admittance(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  AdmittanceMatrix out{ComplexMatrix::Zero(n, n)};
  for (const auto& br : net.branches) {
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
    const auto a = branch_admittance(br);
    out.y(f, f) += a.ff;
    out.y(f, t) += a.ft;
    out.y(t, f) += a.tf;
    out.y(t, t) += a.tt;
  }
  return out;
}

Network scale_load(const Network& net, double target_total_mw) {
  if (!(target_total_mw > 0.0)) throw std::invalid_argument("target load must be positive");
  const double current_mw = net.total_p_demand() * net.base_mva;
  if (!(current_mw > 0.0)) throw std::invalid_argument("network has no real-power demand to scale");
  Network out = net;
  if (std::abs(target_total_mw - current_mw) <= 1e-9 * current_mw) return out;
  const double factor = target_total_mw / current_mw;
  for (auto& b : out.buses) {
    b.p_demand *= factor;
    b.q_demand *= factor;
  }
  return out;
}

}  // namespace psopf
