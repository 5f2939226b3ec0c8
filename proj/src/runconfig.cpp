#include "sgspde/runconfig.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sgspde/errors.hpp"
#include "sgspde/expr.hpp"
#include "sgspde/presets.hpp"

namespace sgspde {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ArgumentError("config key '" + key + "': " + what);
}

void allow_keys(const json& obj, const std::string& where, const std::set<std::string>& keys) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key())) bad(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

std::string text(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& key) {
  if (!v.is_array()) bad(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

Expression parse_expr(const std::string& src, const std::set<std::string>& allowed, const std::string& key) {
  try {
    return Expression::parse(src, allowed);
  } catch (const ParseError& e) {
    throw ParseError("config key '" + key + "': " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" (line")),
                     e.line, e.column);
  }
}

std::vector<SymbolSpec> symbol_list(const json& v, const std::string& key) {
  if (!v.is_array()) bad(key, "expected an array of {expr, order}");
  std::vector<SymbolSpec> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string k = key + "[" + std::to_string(i) + "]";
    allow_keys(v[i], k, {"expr", "order"});
    SymbolSpec s;
    if (!v[i].contains("expr")) bad(k, "missing expr");
    s.expr = text(v[i]["expr"], k + ".expr");
    if (v[i].contains("order")) {
      const auto o = numbers(v[i]["order"], k + ".order");
      if (o.size() != 2) bad(k + ".order", "expected [x order, xi order]");
      s.order = {o[0], o[1]};
    }
    out.push_back(std::move(s));
  }
  return out;
}

json symbol_list_json(const std::vector<SymbolSpec>& list) {
  json out = json::array();
  for (const auto& s : list) out.push_back({{"expr", s.expr}, {"order", {s.order.m, s.order.mu}}});
  return out;
}

void read_nonlinearity(const json& v, const std::string& key, NonlinearitySpec& s) {
  allow_keys(v, key, {"kind", "value", "expr", "class", "envelope", "radius", "gap", "zeta"});
  if (v.contains("kind")) s = NonlinearitySpec{}, s.kind = text(v["kind"], key + ".kind");
  static const std::set<std::string> kinds = {"zero", "constant", "saturation", "square", "expr"};
  if (!kinds.count(s.kind)) bad(key + ".kind", "expected zero, constant, saturation, square or expr");
  if (v.contains("value")) s.value = number(v["value"], key + ".value");
  if (v.contains("expr")) s.expr = text(v["expr"], key + ".expr");
  if (v.contains("class")) {
    const auto c = numbers(v["class"], key + ".class");
    if (c.size() != 4) bad(key + ".class", "expected [z, zeta, r, rho]");
    s.lip = {c[0], c[1], c[2], c[3]};
  }
  if (v.contains("envelope")) s.envelope = number(v["envelope"], key + ".envelope");
  if (v.contains("radius")) s.radius = number(v["radius"], key + ".radius");
  if (v.contains("gap")) s.gap = number(v["gap"], key + ".gap");
  if (v.contains("zeta")) s.zeta = number(v["zeta"], key + ".zeta");
}

json nonlinearity_json(const NonlinearitySpec& s) {
  json o = {{"kind", s.kind}};
  if (s.kind == "constant") o["value"] = s.value;
  if (s.kind == "expr") {
    o["expr"] = s.expr;
    o["class"] = {s.lip.z, s.lip.zeta, s.lip.r, s.lip.rho};
  }
  if (s.kind == "square") o["zeta"] = s.zeta;
  if (s.kind == "saturation" && s.gap) o["gap"] = *s.gap;
  if (s.envelope) o["envelope"] = *s.envelope;
  if (std::isfinite(s.radius)) o["radius"] = s.radius;
  return o;
}

void apply_overrides(const json& doc, RunConfig& c) {
  allow_keys(doc, "", {"preset", "operator", "speed", "grid", "noise", "gamma", "sigma", "cauchy", "index", "horizon",
                       "steps", "auto_horizon", "tol", "max_iter", "seed", "paths", "propagator", "snapshots", "span"});
  if (doc.contains("operator")) {
    const json& o = doc["operator"];
    allow_keys(o, "operator", {"m", "coefficients", "principal", "roots", "label"});
    OperatorSpec op;
    if (!o.contains("m")) bad("operator", "missing m");
    op.m = integer(o["m"], "operator.m");
    if (o.contains("coefficients")) op.coefficients = symbol_list(o["coefficients"], "operator.coefficients");
    if (o.contains("principal")) op.principal = symbol_list(o["principal"], "operator.principal");
    if (o.contains("roots")) op.roots = symbol_list(o["roots"], "operator.roots");
    if (o.contains("label")) op.label = text(o["label"], "operator.label");
    c.op = op;
  }
  if (doc.contains("speed")) c.speed = numbers(doc["speed"], "speed");
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    allow_keys(g, "grid", {"d", "N", "X"});
    if (g.contains("d")) c.grid.d = integer(g["d"], "grid.d");
    if (g.contains("N")) c.grid.n = integer(g["N"], "grid.N");
    if (g.contains("X")) c.grid.halfwidth = number(g["X"], "grid.X");
  }
  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    allow_keys(n, "noise", {"kind", "scale", "atoms", "density", "band", "truncated", "modes"});
    if (n.contains("kind")) c.noise.kind = text(n["kind"], "noise.kind");
    if (n.contains("scale")) c.noise.scale = number(n["scale"], "noise.scale");
    if (n.contains("atoms")) {
      if (!n["atoms"].is_array()) bad("noise.atoms", "expected an array of {at, mass}");
      c.noise.atoms.clear();
      for (std::size_t i = 0; i < n["atoms"].size(); ++i) {
        const std::string k = "noise.atoms[" + std::to_string(i) + "]";
        const json& a = n["atoms"][i];
        allow_keys(a, k, {"at", "mass"});
        if (!a.contains("at") || !a.contains("mass")) bad(k, "needs at and mass");
        const auto at = numbers(a["at"], k + ".at");
        c.noise.atoms.push_back({Eigen::Map<const Eigen::VectorXd>(at.data(), Eigen::Index(at.size())),
                                 number(a["mass"], k + ".mass")});
      }
    }
    if (n.contains("density")) c.noise.density = text(n["density"], "noise.density");
    if (n.contains("band")) c.noise.band = number(n["band"], "noise.band");
    if (n.contains("truncated")) c.noise.truncated = boolean(n["truncated"], "noise.truncated");
    if (n.contains("modes")) c.noise.modes = integer(n["modes"], "noise.modes");
  }
  if (doc.contains("gamma")) read_nonlinearity(doc["gamma"], "gamma", c.gamma);
  if (doc.contains("sigma")) read_nonlinearity(doc["sigma"], "sigma", c.sigma);
  if (doc.contains("cauchy")) {
    if (!doc["cauchy"].is_array()) bad("cauchy", "expected an array of expressions");
    c.cauchy.clear();
    for (std::size_t i = 0; i < doc["cauchy"].size(); ++i)
      c.cauchy.push_back(text(doc["cauchy"][i], "cauchy[" + std::to_string(i) + "]"));
  }
  if (doc.contains("index")) {
    allow_keys(doc["index"], "index", {"z", "zeta"});
    if (doc["index"].contains("z")) c.index.z = number(doc["index"]["z"], "index.z");
    if (doc["index"].contains("zeta")) c.index.zeta = number(doc["index"]["zeta"], "index.zeta");
  }
  if (doc.contains("horizon")) c.horizon = number(doc["horizon"], "horizon");
  if (doc.contains("steps")) c.steps = integer(doc["steps"], "steps");
  if (doc.contains("auto_horizon")) c.auto_horizon = boolean(doc["auto_horizon"], "auto_horizon");
  if (doc.contains("tol")) c.tol = number(doc["tol"], "tol");
  if (doc.contains("max_iter")) c.max_iter = integer(doc["max_iter"], "max_iter");
  if (doc.contains("seed") && doc["seed"].is_null()) {
    c.seed.reset();
  } else if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) bad("seed", "expected a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("paths")) c.paths = integer(doc["paths"], "paths");
  if (doc.contains("propagator")) c.propagator = text(doc["propagator"], "propagator");
  if (doc.contains("snapshots")) c.snapshots = integer(doc["snapshots"], "snapshots");
  if (doc.contains("span")) c.span = number(doc["span"], "span");
}

Symbol symbol_from(const SymbolSpec& s, const std::string& key) {
  const Expression e = parse_expr(s.expr, {"t", "x", "xi"}, key);
  Symbol sym = Symbol::general(
      [e](double t, const Point& x, const Point& xi) {
        ExprVars v;
        v.t = t;
        v.x = x;
        v.xi = xi;
        return Complex(e(v));
      },
      s.order, s.expr);
  sym.with_autonomous(!e.uses("t"));
  return sym;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::vector<std::string> preset_names() { return presets::names(); }

bool classification_only(const std::string& preset) {
  return preset == "sg-wave-squared" || preset == "involutive-demo";
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.seed = 1;
  if (name == "sg-wave") {
    c.grid = {1, 64, 12.0};
    c.noise.modes = 32;
    c.sigma.kind = "saturation";
    c.cauchy = {"exp(-x^2)", "0"};
    c.horizon = 1;
    c.steps = 100;
  } else if (name == "sg-wave-squared") {
    c.grid = {1, 32, 6.0};
  } else if (name == "involutive-demo") {
    c.grid = {2, 8, 2.0};
  } else if (name == "transport") {
    c.grid = {1, 64, 8.0};
    c.noise.kind = "atoms";
    c.noise.atoms = {{Point::Constant(1, 1.0), 0.5}, {Point::Constant(1, -1.0), 0.5}};
    c.noise.modes = 2;
    c.sigma.kind = "saturation";
    c.cauchy = {"exp(-x^2)"};
    c.horizon = 1;
    c.steps = 50;
  } else if (name == "flat-wave-white-noise") {
    c.grid = {1, 128, 1.0};
    c.noise.modes = 64;
    c.sigma.kind = "constant";
    c.sigma.value = 1;
    c.horizon = 0.5;
    c.steps = 100;
    c.auto_horizon = false;
    c.paths = 10000;
  } else {
    throw ArgumentError("unknown preset '" + name + "'");
  }
  return c;
}

RunConfig parse_config(const std::string& src) {
  json doc;
  try {
    doc = json::parse(src);
  } catch (const json::parse_error& e) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < src.size(); ++i) {
      if (src[i] == '\n') line++, col = 1;
      else ++col;
    }
    std::string msg = e.what();
    const auto colon = msg.find(": ", msg.find("]"));
    throw ParseError("malformed config" + (colon == std::string::npos ? "" : ": " + msg.substr(colon + 2)), line, col);
  }
  RunConfig c;
  if (doc.is_object() && doc.contains("preset")) c = preset_config(text(doc["preset"], "preset"));
  apply_overrides(doc, c);
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ArgumentError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

GridSpec parse_grid_flag(const std::string& spec, GridSpec base) {
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ArgumentError("--grid: expected key=value in '" + part + "'");
    const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
    std::size_t used = 0;
    try {
      if (key == "N") base.n = std::stoi(value, &used);
      else if (key == "X") base.halfwidth = std::stod(value, &used);
      else if (key == "d") base.d = std::stoi(value, &used);
      else throw ArgumentError("--grid: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ArgumentError("--grid: malformed value '" + value + "' for " + key);
    }
    if (used != value.size()) throw ArgumentError("--grid: malformed value '" + value + "' for " + key);
  }
  if (base.d != 1 && base.d != 2) throw ArgumentError("--grid: d must be 1 or 2");
  return base;
}

void validate(const RunConfig& c) {
  if (c.grid.d != 1 && c.grid.d != 2) bad("grid.d", "must be 1 or 2");
  if (!is_power_of_two(c.grid.n) || c.grid.n < 4) bad("grid.N", "must be a power of two >= 4");
  if (!(c.grid.halfwidth > 0)) bad("grid.X", "must be positive");
  if (c.preset.empty() && !c.op) bad("operator", "required when no preset is given");
  if (c.op) {
    if (c.op->m < 1) bad("operator.m", "must be positive");
    if (static_cast<int>(c.op->coefficients.size()) != c.op->m) bad("operator.coefficients", "expected m entries");
    if (static_cast<int>(c.op->roots.size()) != c.op->m) bad("operator.roots", "expected m entries");
    if (!c.op->principal.empty() && static_cast<int>(c.op->principal.size()) != c.op->m)
      bad("operator.principal", "expected m entries");
    auto check = [&](const std::vector<SymbolSpec>& list, const std::string& key) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string k = key + "[" + std::to_string(i) + "]";
        if (parse_expr(list[i].expr, {"t", "x", "xi"}, k).max_component() > c.grid.d)
          bad(k, "references a coordinate beyond d");
      }
    };
    check(c.op->coefficients, "operator.coefficients");
    check(c.op->principal, "operator.principal");
    check(c.op->roots, "operator.roots");
  }
  static const std::set<std::string> noise_kinds = {"white", "lebesgue", "atoms", "density"};
  if (!noise_kinds.count(c.noise.kind)) bad("noise.kind", "expected white, lebesgue, atoms or density");
  if (c.noise.kind == "density") {
    if (c.noise.density.empty()) bad("noise.density", "required for a density measure");
    parse_expr(c.noise.density, {"xi"}, "noise.density");
  }
  if (c.noise.kind == "atoms") {
    if (c.noise.atoms.empty()) bad("noise.atoms", "required for an atomic measure");
    for (const auto& a : c.noise.atoms)
      if (a.location.size() != c.grid.d) bad("noise.atoms", "atom dimension must equal grid.d");
  }
  if (c.noise.modes < 1) bad("noise.modes", "must be positive");
  for (const auto* s : {&c.gamma, &c.sigma}) {
    const std::string key = s == &c.gamma ? "gamma" : "sigma";
    if (s->kind == "expr") {
      if (s->expr.empty()) bad(key + ".expr", "required for kind expr");
      if (parse_expr(s->expr, {"t", "x", "u"}, key + ".expr").max_component() > c.grid.d)
        bad(key + ".expr", "references a coordinate beyond d");
    }
  }
  for (std::size_t i = 0; i < c.cauchy.size(); ++i) parse_expr(c.cauchy[i], {"x"}, "cauchy[" + std::to_string(i) + "]");
  if (!(c.horizon > 0)) bad("horizon", "must be positive");
  if (c.steps < 1) bad("steps", "must be positive");
  if (!(c.tol > 0)) bad("tol", "must be positive");
  if (c.max_iter < 1) bad("max_iter", "must be positive");
  if (c.paths < 1) bad("paths", "must be positive");
  if (c.propagator != "exact" && c.propagator != "reference" && c.propagator != "go")
    bad("propagator", "expected exact, reference or go");
  if (c.snapshots < 1) bad("snapshots", "must be positive");
  if (!(c.span > 0)) bad("span", "must be positive");
}

json to_json(const RunConfig& c) {
  json o;
  if (!c.preset.empty()) o["preset"] = c.preset;
  if (c.op) {
    o["operator"] = {{"m", c.op->m},
                     {"coefficients", symbol_list_json(c.op->coefficients)},
                     {"roots", symbol_list_json(c.op->roots)},
                     {"label", c.op->label}};
    if (!c.op->principal.empty()) o["operator"]["principal"] = symbol_list_json(c.op->principal);
  }
  if (c.preset == "transport") o["speed"] = c.speed;
  o["grid"] = {{"d", c.grid.d}, {"N", c.grid.n}, {"X", c.grid.halfwidth}};
  json n = {{"kind", c.noise.kind}, {"modes", c.noise.modes}};
  if (c.noise.kind == "lebesgue") n["scale"] = c.noise.scale;
  if (c.noise.kind == "atoms") {
    n["atoms"] = json::array();
    for (const auto& a : c.noise.atoms)
      n["atoms"].push_back({{"at", std::vector<double>(a.location.data(), a.location.data() + a.location.size())},
                            {"mass", a.mass}});
  }
  if (c.noise.kind == "density") {
    n["density"] = c.noise.density;
    n["band"] = c.noise.band;
    n["truncated"] = c.noise.truncated;
  }
  o["noise"] = n;
  o["gamma"] = nonlinearity_json(c.gamma);
  o["sigma"] = nonlinearity_json(c.sigma);
  o["cauchy"] = c.cauchy;
  o["index"] = {{"z", c.index.z}, {"zeta", c.index.zeta}};
  o["horizon"] = c.horizon;
  o["steps"] = c.steps;
  o["auto_horizon"] = c.auto_horizon;
  o["tol"] = c.tol;
  o["max_iter"] = c.max_iter;
  if (c.seed) o["seed"] = *c.seed;
  o["paths"] = c.paths;
  o["propagator"] = c.propagator;
  o["snapshots"] = c.snapshots;
  o["span"] = c.span;
  return o;
}

std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Grid make_grid(const RunConfig& c) { return Grid(c.grid.d, c.grid.n, c.grid.halfwidth); }

HyperbolicOperator make_operator(const RunConfig& c) {
  if (c.op) {
    HyperbolicOperator op;
    op.m = c.op->m;
    op.dims = c.grid.d;
    op.label = c.op->label;
    for (std::size_t i = 0; i < c.op->coefficients.size(); ++i)
      op.coefficients.push_back(symbol_from(c.op->coefficients[i], "operator.coefficients[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < c.op->principal.size(); ++i)
      op.principal.push_back(symbol_from(c.op->principal[i], "operator.principal[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < c.op->roots.size(); ++i)
      op.roots.push_back(symbol_from(c.op->roots[i], "operator.roots[" + std::to_string(i) + "]"));
    return op;
  }
  if (c.preset == "sg-wave") return presets::sg_wave();
  if (c.preset == "sg-wave-squared") return presets::sg_wave_squared();
  if (c.preset == "involutive-demo") return presets::involutive_demo();
  if (c.preset == "transport") {
    if (static_cast<int>(c.speed.size()) != c.grid.d) bad("speed", "length must equal grid.d");
    return presets::transport(Eigen::Map<const Eigen::VectorXd>(c.speed.data(), Eigen::Index(c.speed.size())));
  }
  if (c.preset == "flat-wave-white-noise") return presets::flat_wave();
  throw ArgumentError("unknown preset '" + c.preset + "'");
}

SpectralMeasure make_measure(const RunConfig& c) {
  const NoiseSpec& n = c.noise;
  if (n.kind == "white") return SpectralMeasure::white_noise(c.grid.d);
  if (n.kind == "lebesgue") return SpectralMeasure::lebesgue(c.grid.d, n.scale);
  if (n.kind == "atoms") return SpectralMeasure::atoms(n.atoms);
  const Expression e = parse_expr(n.density, {"xi"}, "noise.density");
  return SpectralMeasure::density(
      c.grid.d,
      [e](const Point& xi) {
        ExprVars v;
        v.xi = xi;
        return e(v);
      },
      n.band, n.truncated, true, n.density);
}

Nonlinearity make_nonlinearity(const NonlinearitySpec& s, double default_gap) {
  Nonlinearity g;
  if (s.kind == "zero") return Nonlinearity::zero();
  if (s.kind == "constant") return Nonlinearity::constant(s.value);
  if (s.kind == "saturation") {
    g = weighted_saturation(s.gap.value_or(default_gap));
  } else if (s.kind == "square") {
    g = square_map(s.zeta, s.radius);
  } else {
    const Expression e = parse_expr(s.expr, {"t", "x", "u"}, "nonlinearity");
    g = Nonlinearity::of(
        [e](double t, const Point& x, double u) {
          ExprVars v;
          v.t = t;
          v.x = x;
          v.u = u;
          return e(v);
        },
        s.lip, s.expr);
    g.depends_on_u = e.uses("u");
  }
  if (s.envelope) {
    const double c = *s.envelope;
    g.envelope = [c](double) { return c; };
  }
  if (std::isfinite(s.radius)) g.local_radius = s.radius;
  return g;
}

PropagatorFactory make_factory(const RunConfig& c) {
  PropagatorFactory f;
  if (c.propagator == "reference") f.kind = PropagatorKind::Reference;
  if (c.propagator == "go") f.kind = PropagatorKind::GeometricOptics;
  return f;
}

SPDEProblem make_problem(const RunConfig& c, const Grid& g, double default_gap) {
  SPDEProblem p;
  p.op = make_operator(c);
  p.gamma = make_nonlinearity(c.gamma, default_gap);
  p.sigma = make_nonlinearity(c.sigma, default_gap);
  p.measure = make_measure(c);
  p.index = c.index;
  p.horizon = c.horizon;
  p.name = c.preset.empty() ? "custom" : c.preset;
  if (!c.cauchy.empty()) {
    if (static_cast<int>(c.cauchy.size()) != p.op.m) bad("cauchy", "expected m expressions");
    for (std::size_t i = 0; i < c.cauchy.size(); ++i) {
      const Expression e = parse_expr(c.cauchy[i], {"x"}, "cauchy[" + std::to_string(i) + "]");
      Field f(g);
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        ExprVars v;
        v.x = g.point(j);
        f.values[j] = e(v);
      }
      p.cauchy_data.push_back(f);
    }
  }
  return p;
}

}  // namespace sgspde
