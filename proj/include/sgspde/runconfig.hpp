#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgspde/mildsolve.hpp"

namespace sgspde {

struct SymbolSpec {
  std::string expr;  // over t, x, xi
  Order order;       // (x order, xi order)
};

struct OperatorSpec {
  int m = 1;
  std::vector<SymbolSpec> coefficients;  // a_1 .. a_m
  std::vector<SymbolSpec> principal;     // optional principal parts
  std::vector<SymbolSpec> roots;
  std::string label;
};

struct GridSpec {
  int d = 1;
  int n = 64;
  double halfwidth = 8;
};

struct NoiseSpec {
  std::string kind = "white";  // white | lebesgue | atoms | density
  double scale = 1;
  std::vector<Atom> atoms;
  std::string density;  // over xi
  double band = 4;
  bool truncated = true;
  int modes = 32;
};

struct NonlinearitySpec {
  std::string kind = "zero";  // zero | constant | saturation | square | expr
  double value = 0;
  std::string expr;  // over t, x, u
  LipClass lip;
  std::optional<double> envelope;
  double radius = std::numeric_limits<double>::infinity();
  std::optional<double> gap;  // saturation weight exponent; m - l when absent
  double zeta = 1;            // square map smoothness
};

struct RunConfig {
  std::string preset;
  std::optional<OperatorSpec> op;
  std::vector<double> speed{1.0};  // transport preset
  GridSpec grid;
  NoiseSpec noise;
  NonlinearitySpec gamma;
  NonlinearitySpec sigma;
  std::vector<std::string> cauchy;  // D_t^j u(0) over x; empty means zero data
  SobolevKatoIndex index;
  double horizon = 1;
  int steps = 100;
  bool auto_horizon = true;
  double tol = 1e-6;
  int max_iter = 50;
  std::optional<std::uint64_t> seed;
  int paths = 100;
  std::string propagator = "exact";  // exact | reference | go
  int snapshots = 5;
  double span = 0.05;  // propagator-test interval length
};

std::vector<std::string> preset_names();
bool classification_only(const std::string& preset);
RunConfig preset_config(const std::string& name);

// JSON text; a "preset" key seeds the defaults that the remaining keys override. Syntax errors carry line/column.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& file);

// "N=<n>,X=<x>,d=<1|2>", any subset, applied over base.
GridSpec parse_grid_flag(const std::string& text, GridSpec base);

// Throws ArgumentError or ParseError on invalid content.
void validate(const RunConfig& c);

nlohmann::json to_json(const RunConfig& c);
// FNV-1a 64 of the canonical JSON of the resolved config, 16 hex digits.
std::string config_hash(const RunConfig& c);

Grid make_grid(const RunConfig& c);
HyperbolicOperator make_operator(const RunConfig& c);
SpectralMeasure make_measure(const RunConfig& c);
Nonlinearity make_nonlinearity(const NonlinearitySpec& s, double default_gap);
PropagatorFactory make_factory(const RunConfig& c);
// Operator, nonlinearities, measure, Cauchy data and index on g; default_gap is m - l of the reduced system.
SPDEProblem make_problem(const RunConfig& c, const Grid& g, double default_gap);

}  // namespace sgspde
