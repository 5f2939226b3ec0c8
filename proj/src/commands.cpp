#include "sgspde/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "CLI11.hpp"
#include "sgspde/errors.hpp"
#include "sgspde/snapshot.hpp"

namespace sgspde {

namespace {

struct HypothesisViolation : Error {
  using Error::Error;
};

std::string num(double v) { return std::isfinite(v) ? format_number(v) : (v > 0 ? "inf" : std::isnan(v) ? "nan" : "-inf"); }

std::string step_name(const std::string& field, int step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_step%05d.bin", field.c_str(), step);
  return buf;
}

void emit(const CommandContext& ctx, const std::string& name, const CsvTable& table) {
  if (ctx.out) write_text(*ctx.out / name, table.render(config_hash(ctx.config)));
}

void emit_snapshot(const CommandContext& ctx, const std::string& field, int step, double t, const Eigen::VectorXd& v) {
  if (!ctx.out) return;
  SnapshotHeader h;
  h.d = ctx.config.grid.d;
  h.n = ctx.config.grid.n;
  h.halfwidth = ctx.config.grid.halfwidth;
  h.t = t;
  h.field = field;
  h.config_hash = config_hash(ctx.config);
  write_snapshot(*ctx.out / step_name(field, step), h, v);
}

std::vector<int> snapshot_steps(int steps, int count) {
  std::set<int> s{0, steps};
  for (int k = 1; k < count; ++k) s.insert(static_cast<int>(std::lround(double(k) * steps / count)));
  return {s.begin(), s.end()};
}

std::vector<double> classification_times(const HyperbolicOperator& op) {
  return op.autonomous() ? std::vector<double>{0.0} : std::vector<double>{0.0, 0.5};
}

struct Setup {
  Grid grid;
  FirstOrderSystem sys;
  SPDEProblem problem;
  PropagatorFactory factory;
  double dt = 0;
  int steps = 0;
  ContractionEstimate estimate;
  std::vector<double> kappas;
};

Setup prepare(const CommandContext& ctx, std::ostream& report) {
  const RunConfig& c = ctx.config;
  if (classification_only(c.preset))
    throw UnsupportedError("preset '" + c.preset + "' is for classification only (use classify or check-noise)");
  if (!c.seed) throw ArgumentError("a seed is required: set \"seed\" in the config or pass --seed");
  Setup s{make_grid(c), {}, {}, make_factory(c), c.horizon / c.steps, c.steps, {}, {}};
  const HyperbolicOperator op = make_operator(c);
  s.sys = build_system(op, s.grid);
  const int gap = s.sys.m - s.sys.l;
  s.problem = make_problem(c, s.grid, gap);
  s.problem.measure.validate();
  if (compatibility_integral(s.problem.measure, gap).infinite)
    throw HypothesisViolation("compatibility integral with exponent m-l=" + std::to_string(gap) + " is infinite");
  if (c.auto_horizon) {
    const HorizonChoice h = choose_horizon(s.problem, s.sys, s.dt, s.factory);
    s.steps = h.steps;
    s.estimate = h.estimate;
    s.kappas = h.kappas;
  } else {
    s.estimate = contraction_constant(s.problem, KernelFamily(s.sys, s.dt, s.steps, s.factory));
    s.kappas = {s.estimate.kappa};
    if (s.estimate.kappa >= 1)
      throw NoContractionError("kappa=" + num(s.estimate.kappa) + " >= 1 at the configured horizon", s.estimate.kappa);
  }
  report << "system: m=" << s.sys.m << " l=" << s.sys.l << " dim=" << s.sys.dim() << "\n";
  report << "contraction: kappa=" << num(s.estimate.kappa) << " T0=" << num(s.steps * s.dt) << " steps=" << s.steps
         << " kernel_norm=" << num(s.estimate.kernel_norm) << " lipschitz=" << num(s.estimate.lipschitz)
         << " sup_integral=" << num(s.estimate.sup_integral) << "\n";
  return s;
}

CsvTable summary_table() { return CsvTable{{"key", "value"}, {}}; }

}  // namespace

int cmd_check_noise(const CommandContext& ctx, std::ostream& report) {
  const RunConfig& c = ctx.config;
  const Grid g = make_grid(c);
  const HyperbolicOperator op = make_operator(c);
  const SpectralMeasure mu = make_measure(c);
  mu.validate();
  const Classification cls = classify_roots(op, g, classification_times(op));
  const int m = op.m, l = cls.l;
  const std::string applies = cls.kind == RootClass::Strict       ? "H1"
                              : cls.kind == RootClass::Involutive ? "H3"
                                                                  : "H2";
  report << "operator: m=" << m << " l=" << l << " class=" << cls.describe() << "\n";
  report << "measure: " << c.noise.kind << (mu.name().empty() ? "" : " (" + mu.name() + ")") << "\n";
  CsvTable table{{"hypothesis", "exponent", "value", "finite", "applies"}, {}};
  bool violated = false;
  const std::pair<std::string, int> rows[] = {{"H1", m - 1}, {"H2", m - l}, {"H3", 0}};
  for (const auto& [name, exponent] : rows) {
    const CompatibilityValue v = compatibility_integral(mu, exponent);
    const double value = v.infinite ? std::numeric_limits<double>::infinity() : v.value;
    const bool here = name == applies;
    if (here && v.infinite) violated = true;
    report << name << " exponent=" << exponent << " value=" << num(value) << " "
           << (v.infinite ? "violated" : "satisfied") << (here ? " (applies)" : "") << "\n";
    table.add({name, std::to_string(exponent), num(value), v.infinite ? "0" : "1", here ? "1" : "0"});
  }
  emit(ctx, "noise.csv", table);
  report << "verdict: " << (violated ? "hypothesis " + applies + " violated" : "compatible") << "\n";
  return violated ? kExitViolation : kExitOk;
}

int cmd_solve(const CommandContext& ctx, std::ostream& report) {
  const Setup s = prepare(ctx, report);
  const KernelFamily kernels(s.sys, s.dt, s.steps, s.factory);
  const CMBasis basis = build_cm_basis(s.problem.measure, ctx.config.noise.modes, s.grid);
  if (!basis.warning.empty()) report << "basis: " << basis.warning << "\n";
  const WienerPath path = sample_path(basis.size(), s.dt, s.steps, *ctx.config.seed, 0);
  PicardOptions opts{ctx.config.tol, ctx.config.max_iter};
  const PicardResult r = picard_solve(s.problem, kernels, basis, path, opts);
  const SobolevKatoIndex it = iteration_index(s.problem, s.sys);

  for (int j : snapshot_steps(s.steps, ctx.config.snapshots)) emit_snapshot(ctx, "u", j, r.times[j], r.u[j].values.real());
  CsvTable norms{{"step", "t", "norm"}, {}};
  for (int j = 0; j <= s.steps; ++j) norms.add({std::to_string(j), num(r.times[j]), num(sk_norm(r.u[j], it))});
  emit(ctx, "norms.csv", norms);
  CsvTable picard{{"iteration", "difference", "ratio"}, {}};
  for (std::size_t i = 0; i < r.differences.size(); ++i)
    picard.add({std::to_string(i + 1), num(r.differences[i]),
                i && r.differences[i - 1] > 0 ? num(r.differences[i] / r.differences[i - 1]) : ""});
  emit(ctx, "picard.csv", picard);
  CsvTable summary = summary_table();
  summary.add({"kappa", num(s.estimate.kappa)});
  summary.add({"horizon", num(s.steps * s.dt)});
  summary.add({"steps", std::to_string(s.steps)});
  summary.add({"modes", std::to_string(basis.size())});
  summary.add({"iterations", std::to_string(r.iterations)});
  summary.add({"residual", num(r.residual)});
  summary.add({"clipped", r.clipped ? "1" : "0"});
  summary.add({"seed", std::to_string(*ctx.config.seed)});
  emit(ctx, "summary.csv", summary);

  report << "picard: iterations=" << r.iterations << " residual=" << num(r.residual)
         << " final_difference=" << num(r.differences.back()) << (r.clipped ? " clipped" : "") << "\n";
  report << "norm at T0: " << num(sk_norm(r.u.back(), it)) << "\n";
  return kExitOk;
}

int cmd_mc(const CommandContext& ctx, std::ostream& report) {
  const Setup s = prepare(ctx, report);
  const KernelFamily kernels(s.sys, s.dt, s.steps, s.factory);
  const CMBasis basis = build_cm_basis(s.problem.measure, ctx.config.noise.modes, s.grid);
  if (!basis.warning.empty()) report << "basis: " << basis.warning << "\n";
  PicardOptions opts{ctx.config.tol, ctx.config.max_iter};
  const MonteCarloStats st =
      monte_carlo_moments(s.problem, kernels, basis, ctx.config.paths, *ctx.config.seed, opts, ctx.threads);

  for (int j : snapshot_steps(s.steps, ctx.config.snapshots)) {
    emit_snapshot(ctx, "mean", j, st.times[j], st.mean[j]);
    emit_snapshot(ctx, "variance", j, st.times[j], st.variance[j]);
  }
  CsvTable stats{{"step", "t", "norm_mean", "norm_stderr", "variance_mean", "variance_max"}, {}};
  for (int j = 0; j <= s.steps; ++j)
    stats.add({std::to_string(j), num(st.times[j]), num(st.norm_mean[j]), num(st.norm_stderr[j]),
               num(st.variance[j].mean()), num(st.variance[j].maxCoeff())});
  emit(ctx, "stats.csv", stats);
  CsvTable summary = summary_table();
  summary.add({"kappa", num(s.estimate.kappa)});
  summary.add({"horizon", num(s.steps * s.dt)});
  summary.add({"steps", std::to_string(s.steps)});
  summary.add({"modes", std::to_string(basis.size())});
  summary.add({"paths", std::to_string(st.paths)});
  summary.add({"failures", std::to_string(st.failures)});
  summary.add({"seed", std::to_string(*ctx.config.seed)});
  emit(ctx, "summary.csv", summary);
  if (st.failures) {
    CsvTable fails{{"message"}, {}};
    for (const auto& msg : st.failure_messages) fails.add({"\"" + msg + "\""});
    emit(ctx, "failures.csv", fails);
  }

  report << "ensemble: paths=" << st.paths << " failures=" << st.failures << "\n";
  report << "norm at T0: " << num(st.norm_mean.back()) << " +- " << num(st.norm_stderr.back()) << "\n";
  report << "mean variance at T0: " << num(st.variance.back().mean()) << "\n";
  if (st.paths == 0) throw Error("every path failed; first: " + st.failure_messages.front());
  return kExitOk;
}

int cmd_propagator_test(const CommandContext& ctx, std::ostream& report) {
  const RunConfig& c = ctx.config;
  const Grid g = make_grid(c);
  const FirstOrderSystem sys = build_system(make_operator(c), g);
  const double span = c.span;
  const int rows = static_cast<int>(sys.blocks.front().root_order.size());
  PropagatorFactory go;
  go.kind = PropagatorKind::GeometricOptics;
  go.go_max_span = span;

  double go_vs_ref = 0;
  const PropagatorGO e0 = build_go_propagator(sys, 0, 0, span);
  for (std::uint64_t probe = 0; probe < 3; ++probe) {
    const State w = localized_state(g, rows, 100 + probe);
    go_vs_ref = std::max(go_vs_ref, relative_difference(e0.apply(w), propagate_reference(sys, 0, w, 0, span, 256)));
  }
  const double group = check_group_property(sys, 0, go, span, span / 2, 0);
  const double inverse = check_inverse_property(sys, 0, go, 0, span);
  const double r1 = go_equation_residual(sys, 0, 0, span, 2), r2 = go_equation_residual(sys, 0, 0, span / 2, 2);

  struct Row {
    std::string name;
    double value, tolerance;
    bool pass;
  };
  const std::vector<Row> table_rows = {
      {"go_vs_reference", go_vs_ref, 1e-3, go_vs_ref <= 1e-3},
      {"group_property", group, 5e-3, group <= 5e-3},
      {"inverse_property", inverse, 5e-3, inverse <= 5e-3},
      {"equation_residual_full_span", r1, r1, true},
      {"equation_residual_half_span", r2, 0.75 * r1, r2 <= 0.75 * r1 || r1 <= 1e-6},
  };
  CsvTable table{{"check", "value", "tolerance", "pass"}, {}};
  bool ok = true;
  report << "propagator-test: span=" << num(span) << " grid N=" << g.n() << " X=" << num(g.halfwidth())
         << "\n";
  for (const Row& r : table_rows) {
    ok = ok && r.pass;
    table.add({r.name, num(r.value), num(r.tolerance), r.pass ? "1" : "0"});
    report << r.name << " " << num(r.value) << " (tol " << num(r.tolerance) << ") " << (r.pass ? "pass" : "FAIL")
           << "\n";
  }
  emit(ctx, "residuals.csv", table);
  return ok ? kExitOk : kExitViolation;
}

int cmd_classify(const CommandContext& ctx, std::ostream& report) {
  const RunConfig& c = ctx.config;
  const Grid g = make_grid(c);
  const HyperbolicOperator op = make_operator(c);
  const Classification cls = classify_roots(op, g, classification_times(op));
  const char* kind = cls.kind == RootClass::Strict                   ? "Strict"
                     : cls.kind == RootClass::ConstantMultiplicities ? "ConstantMultiplicities"
                     : cls.kind == RootClass::Involutive             ? "Involutive"
                                                                     : "Unclassified";
  report << "classification: " << kind << " l=" << cls.l << " separation=" << num(cls.separation)
         << " groups=" << cls.groups.size() << "\n";
  if (cls.kind == RootClass::Involutive) report << "bracket ratio: " << num(cls.bracket_ratio) << "\n";
  CsvTable table = summary_table();
  table.add({"class", kind});
  table.add({"l", std::to_string(cls.l)});
  table.add({"separation", num(cls.separation)});
  table.add({"groups", std::to_string(cls.groups.size())});
  table.add({"bracket_ratio", num(cls.bracket_ratio)});
  emit(ctx, "classification.csv", table);
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic hyperbolic PDE toolkit"};
  app.require_subcommand(1);
  std::string config_path, preset, grid, out_dir;
  std::uint64_t seed = 0;
  int paths = 0, threads = 0;
  app.set_version_flag("--version", std::string(library_version()));

  using Cmd = int (*)(const CommandContext&, std::ostream&);
  const std::pair<const char*, std::pair<const char*, Cmd>> commands[] = {
      {"check-noise", {"Compatibility integrals and hypothesis verdicts", cmd_check_noise}},
      {"solve", {"Picard solve on one noise path", cmd_solve}},
      {"mc", {"Monte Carlo moments over many paths", cmd_mc}},
      {"propagator-test", {"GO propagator fidelity checks", cmd_propagator_test}},
      {"classify", {"Classify the characteristic roots", cmd_classify}},
  };
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts, paths_opts;
  for (const auto& [name, info] : commands) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "Preset name")->check(CLI::IsMember(preset_names()));
    seed_opts.push_back(sub->add_option("--seed", seed, "Noise seed (u64)"));
    sub->add_option("--out", out_dir, "Output directory");
    paths_opts.push_back(sub->add_option("--paths", paths, "Monte Carlo path count")->check(CLI::PositiveNumber));
    sub->add_option("--grid", grid, "Grid override N=<n>,X=<x>,d=<1|2>");
    sub->add_option("--threads", threads, "Worker threads for ensembles (0: hardware)")->check(CLI::NonNegativeNumber);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    std::size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    if (config_path.empty() == preset.empty()) throw ArgumentError("give exactly one of --config or --preset");
    CommandContext ctx;
    ctx.config = config_path.empty() ? preset_config(preset) : load_config(config_path);
    if (!grid.empty()) ctx.config.grid = parse_grid_flag(grid, ctx.config.grid);
    if (seed_opts[which]->count()) ctx.config.seed = seed;
    if (paths_opts[which]->count()) ctx.config.paths = paths;
    validate(ctx.config);
    if (!out_dir.empty()) ctx.out = std::filesystem::path(out_dir);
    ctx.threads = threads;
    out << "config_hash=" << config_hash(ctx.config) << " version=" << library_version() << "\n";
    if (ctx.out) write_text(*ctx.out / "config.json", to_json(ctx.config).dump(2) + "\n");
    return commands[which].second.second(ctx, out);
  } catch (const HypothesisViolation& e) {
    err << "hypothesis violated: " << e.what() << "\n";
    return kExitViolation;
  } catch (const NoContractionError& e) {
    err << "no contraction: " << e.what() << "\n";
    return kExitViolation;
  } catch (const NotHyperbolicError& e) {
    err << "not hyperbolic: " << e.what() << "\n";
    return kExitViolation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace sgspde
