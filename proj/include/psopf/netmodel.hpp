#pragma once

// Power-system data model: buses, branches, generators, shunt compensators,
// the text case format, load scaling and bus admittance assembly.
//
// All electrical quantities are per-unit on Network::base_mva; angles are in
// radians. Generator cost coefficients are in the MW domain.

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace psopf {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Raised when a case file cannot be read; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a structurally well-formed network breaks a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusKind { Slack, Generator, Load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Load;
  double p_demand = 0.0;
  double q_demand = 0.0;
  double v_mag = 1.0;
  double v_angle = 0.0;
  double v_min = 0.95;
  double v_max = 1.1;

  bool operator==(const Bus&) const = default;
};

struct TapBounds {
  double min = 1.0;
  double max = 1.0;

  bool operator==(const TapBounds&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_total = 0.0;
  double tap_ratio = 1.0;
  std::optional<TapBounds> tap;  // present only for regulating transformers
  double s_rating = 0.0;

  bool is_transformer() const noexcept { return tap.has_value(); }
  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_out = 0.0;
  double q_out = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double v_setpoint = 1.0;
  double cost_a = 0.0;  // $/hr
  double cost_b = 0.0;  // $/MWh
  double cost_c = 0.0;  // $/MW^2h

  bool operator==(const Generator&) const = default;
};

/// Switchable VAR source modelled as a controllable reactive injection.
struct ShuntCompensator {
  int bus = 0;
  double q_injection = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;

  bool operator==(const ShuntCompensator&) const = default;
};

struct Network {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<ShuntCompensator> shunts;

  std::size_t bus_count() const noexcept { return buses.size(); }

  /// Position of a bus id in `buses`; throws std::out_of_range if absent.
  std::size_t bus_index(int id) const;

  /// Position of the single slack bus.
  std::size_t slack_index() const;

  /// Generator attached to the bus at `bus_pos`, or -1.
  int generator_at(std::size_t bus_pos) const;

  double total_p_demand() const noexcept;

  bool operator==(const Network&) const = default;
};

/// Parse the sectioned text case format. Throws ParseError / ValidationError.
Network parse_case(std::string_view text);
Network load_case_file(const std::string& path);

/// Write a network in the format accepted by parse_case. Values are printed
/// in shortest round-trip form so parse_case(serialize_case(n)) == n.
std::string serialize_case(const Network& net);

/// Check every Network invariant; throws ValidationError on the first failure.
void validate(const Network& net);

/// Series admittance 1/(r + jx). Throws ValidationError for x == 0 and r == 0.
Complex series_admittance(const Branch& br);

/// The four pi-model terminal admittances of one branch, tap on the from side.
struct BranchAdmittance {
  Complex ff, ft, tf, tt;
};
BranchAdmittance branch_admittance(const Branch& br);

/// Dense N x N bus admittance matrix in the bus order of `net.buses`.
struct AdmittanceMatrix {
  ComplexMatrix y;

  Eigen::Index size() const noexcept { return y.rows(); }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return y(i, j); }
};

AdmittanceMatrix build_admittance(const Network& net);

/// Scale every bus demand by target / current total. Power factors are kept.
Network scale_load(const Network& net, double target_total_mw);

}  // namespace psopf
