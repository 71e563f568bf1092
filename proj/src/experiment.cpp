#include "dirlab/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dirlab/contraction.hpp"
#include "dirlab/discrete.hpp"
#include "dirlab/kernels.hpp"
#include "dirlab/scaling.hpp"
#include "dirlab/spectral.hpp"
#include "dirlab/stochastic.hpp"

namespace dirlab {

using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<std::string> kKinds{"spectrum",       "smalldev",    "heatcontent",
                                      "dilation_check", "contraction", "kernel_bounds"};

// Field defaults per section; the default's JSON type is the accepted type.
const json& schema(const std::string& section) {
  static const std::map<std::string, json> s{
      {"space", {{"kind", "euclidean"}, {"dim", 1}, {"scale", "dirichlet_form"}, {"level", 3}}},
      {"domain",
       {{"shape", "interval"},
        {"a", 0.0},
        {"b", 1.0},
        {"lo", json::array({0.0, 0.0, 0.0})},
        {"hi", json::array({1.0, 1.0, 1.0})},
        {"gauge", "euclidean_norm"},
        {"radius", 1.0},
        {"center", json::array({0.0, 0.0, 0.0})},
        {"vertices", json::array()},
        {"r_in", 0.3},
        {"r_out", 1.0},
        {"z_lo", -0.5},
        {"z_hi", 0.5}}},
      {"mesh", {{"h", 0.05}, {"h_z", 0.0}, {"k", 5}, {"n_theta", 0}, {"r", 1.0}, {"dense_threshold", 2000}}},
      {"mc",
       {{"N", 100000},
        {"h_t", 1e-3},
        {"t", 1.0},
        {"t_list", json::array()},
        {"eps_list", json::array()},
        {"start", json::array({0.0, 0.0, 0.0})},
        {"bridge_correction", true},
        {"quadrature_h", 0.0},
        {"particles", 0},
        {"replicates", 8},
        {"h_rel", 2e-3},
        {"stage_rel", 0.5},
        {"required", false}}},
      {"dilation",
       {{"kind", "euclidean"},
        {"r0", 2.0},
        {"r", 2.0},
        {"t", 0.05},
        {"exponents", json::array()},
        {"epsilons", json::array()},
        {"levels", json::array({3, 4, 5})},
        {"samples", 100}}},
      {"bounds",
       {{"family", "gaussian_ahlfors"},
        {"C1", 1.0},
        {"C2", 0.5},
        {"K1", 4.0},
        {"K2", 2.0},
        {"alpha", 1.0},
        {"beta", 2.0},
        {"c1", 1.0},
        {"c2", 1.0},
        {"c3", 1.0},
        {"c4", 1.0},
        {"kappa", 1.0},
        {"nu", 3.0},
        {"volume", 1.0},
        {"lambda", 1.0},
        {"t_list", json::array({0.1, 1.0, 10.0})},
        {"d_list", json::array({0.0, 0.5, 1.0})}}},
      {"contraction",
       {{"r_list", json::array({0.4, 0.2, 0.1, 0.05})},
        {"coef_r_list", json::array({0.1, 0.05, 0.025})},
        {"rho_grid", json::array()},
        {"sandwich_r", json::array({0.2, 0.1, 0.05})},
        {"eps_tol", 0.05},
        {"lambda_h", 0.0},
        {"smalldev", false}}},
  };
  return s.at(section);
}

const std::map<std::string, std::vector<std::string>>& shape_fields() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"interval", {"a", "b"}},
      {"box", {"lo", "hi"}},
      {"ball", {"gauge", "radius", "center"}},
      {"polygon", {"vertices"}},
      {"annulus", {"r_in", "r_out", "z_lo", "z_hi"}},
  };
  return m;
}

// 1-based line of the first `"field"` after `"section"` in the source text.
int line_of(const std::string& text, const std::string& section, const std::string& field) {
  std::size_t from = 0;
  if (!section.empty()) {
    from = text.find('"' + section + '"');
    if (from == std::string::npos) from = 0;
  }
  const std::size_t at = text.find('"' + field + '"', from);
  if (at == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
}

[[noreturn]] void fail(const std::string& text, const std::string& section, const std::string& field,
                       const std::string& msg) {
  std::string where = section.empty() ? field : section + "." + field;
  const int line = line_of(text, section, field);
  if (line > 0) where += " (line " + std::to_string(line) + ")";
  throw ConfigError("config: " + where + ": " + msg);
}

bool same_type(const json& def, const json& v) {
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_array()) return v.is_array();
  return true;
}

json resolve_section(const std::string& text, const std::string& name, const json& given) {
  const json& def = schema(name);
  json out = def;
  if (given.is_null()) return out;
  if (!given.is_object()) fail(text, "", name, "expected an object");
  for (const auto& [k, v] : given.items()) {
    if (!def.contains(k)) fail(text, name, k, "unknown field");
    if (!same_type(def.at(k), v)) fail(text, name, k, "expected " + std::string(def.at(k).type_name()));
    out[k] = v;
  }
  return out;
}

json resolve_domain(const std::string& text, const json& given) {
  json full = resolve_section(text, "domain", given);
  const std::string shape = full.at("shape").get<std::string>();
  const auto it = shape_fields().find(shape);
  if (it == shape_fields().end()) fail(text, "domain", "shape", "unknown shape '" + shape + "'");
  if (given.is_object())
    for (const auto& [k, v] : given.items())
      if (k != "shape" && std::find(it->second.begin(), it->second.end(), k) == it->second.end())
        fail(text, "domain", k, "does not apply to shape '" + shape + "'");
  json out{{"shape", shape}};
  for (const auto& f : it->second) out[f] = full.at(f);
  return out;
}

Point to_point(const json& a) {
  Point p{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < std::min<std::size_t>(3, a.size()); ++i) p[i] = a.at(i).get<double>();
  return p;
}

std::vector<double> to_doubles(const json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

SpaceModel make_space(const json& s) {
  const std::string kind = s.at("kind");
  const GeneratorScale scale = generator_scale_from_string(s.at("scale"));
  if (kind == "euclidean") return SpaceModel::euclidean(s.at("dim").get<int>(), scale);
  if (kind == "heisenberg") return SpaceModel::heisenberg(scale);
  if (kind == "su2") return SpaceModel::su2(scale);
  if (kind == "gasket") return SpaceModel::gasket(s.at("level").get<int>());
  throw ConfigError("config: space.kind: unknown space '" + kind + "'");
}

ShapePtr make_shape(const json& d) {
  const std::string shape = d.at("shape");
  if (shape == "interval") return interval(d.at("a"), d.at("b"));
  if (shape == "box") return box(to_point(d.at("lo")), to_point(d.at("hi")));
  if (shape == "ball")
    return ball(Gauge{gauge_kind_from_string(d.at("gauge")), 1.0}, d.at("radius").get<double>(),
                to_point(d.at("center")));
  if (shape == "polygon") {
    std::vector<std::array<double, 2>> v;
    for (const auto& p : d.at("vertices")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("config: domain.vertices: expected [x, y] pairs");
      v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    return polygon(std::move(v));
  }
  return annulus(d.at("r_in"), d.at("r_out"), d.at("z_lo"), d.at("z_hi"));
}

Domain make_config_domain(const ExperimentConfig& c) {
  return make_domain(make_space(c.space), make_shape(c.domain), c.domain.at("shape").get<std::string>());
}

CylindricalGrid cylindrical_grid(const ExperimentConfig& c, const Domain& d) {
  CylindricalGrid g = default_cylindrical_grid(d, c.mesh.at("h").get<double>());
  const int nt = c.mesh.at("n_theta").get<int>();
  if (nt > 0) g.n_theta = nt;
  return g;
}

OperatorMesh build_mesh(const ExperimentConfig& c, const Domain& d) {
  const double h = c.mesh.at("h");
  switch (d.space().kind) {
    case SpaceKind::euclidean: return assemble_euclidean(d, h);
    case SpaceKind::heisenberg3: return assemble_heisenberg(d, h, c.mesh.at("h_z").get<double>());
    case SpaceKind::su2_chart: return assemble_su2_rescaled(c.mesh.at("r").get<double>(), d, cylindrical_grid(c, d));
    case SpaceKind::gasket: return assemble_gasket(d.space().level);
  }
  throw Unsupported("no assembler for this space");
}

EigensolveOptions solve_options(const ExperimentConfig& c) {
  EigensolveOptions o;
  o.dense_threshold = c.mesh.at("dense_threshold");
  o.seed = c.seed;
  return o;
}

Process make_process(const SpaceModel& s) {
  switch (s.kind) {
    case SpaceKind::euclidean: return Process::euclidean(s.dim, s.scale);
    case SpaceKind::heisenberg3: return Process::heisenberg(s.scale);
    case SpaceKind::su2_chart: return Process::su2(s.scale);
    case SpaceKind::gasket: break;
  }
  throw Unsupported("no diffusion is simulated on the gasket");
}

std::size_t nearest_node(const OperatorMesh& m, const Point& x) {
  std::size_t best = 0;
  double bd = INFINITY;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& p = m.nodes[i];
    const double d = std::hypot(p[0] - x[0], p[1] - x[1], p[2] - x[2]);
    if (d < bd) bd = d, best = i;
  }
  return best;
}

void audit(RunResult& r, const std::string& name, bool ok, bool hard, const std::string& detail = {}) {
  r.audits.push_back({name, ok ? "pass" : "fail", hard, detail});
}

void skip(RunResult& r, const std::string& name, const std::string& detail) {
  r.audits.push_back({name, "skipped", false, detail});
}

// ---------------------------------------------------------------------------

void run_spectrum(const ExperimentConfig& c, RunResult& r) {
  const Domain d = make_config_domain(c);
  const auto mesh = share(build_mesh(c, d));
  const SpectralData sd = eigensolve(mesh, c.mesh.at("k").get<int>(), solve_options(c));
  r.results.header = {"n", "eigenvalue", "coefficient", "residual"};
  double worst_res = 0.0;
  for (int n = 0; n < sd.k; ++n) {
    r.results.add({fmt(n + 1), fmt(sd.eigenvalues[n]), fmt(sd.coefficients[n]), fmt(sd.residuals[n])});
    worst_res = std::max(worst_res, sd.residuals[n] / std::max(1.0, sd.eigenvalues[n]));
  }
  audit(r, "eigenvalues_ascending", std::is_sorted(sd.eigenvalues.begin(), sd.eigenvalues.end()), true);
  audit(r, "residuals", worst_res <= 1e-6, true, "max relative residual " + fmt(worst_res));
  const GroundStateReport g = ground_state_audit(sd);
  audit(r, "ground_state_simple", g.simple, d.connected(), "gap " + fmt(g.gap));
  audit(r, "ground_state_positive", g.positive_after_sign_fix, d.connected(), "min " + fmt(g.min_value));
  const auto sign = offdiag_sign_report(*mesh);
  r.summary["nodes"] = mesh->size();
  r.summary["dense"] = sd.dense;
  r.summary["lambda1"] = sd.eigenvalues.front();
  r.summary["multiplicity"] = ground_multiplicity(sd);
  r.summary["positive_offdiag"] = sign.positive_offdiag;
  if (d.space().kind == SpaceKind::euclidean && d.space().dim == 1) {
    const double L = c.domain.at("b").get<double>() - c.domain.at("a").get<double>();
    const double f = generator_factor(d.space().scale);
    const double lam = f * kPi * kPi / (L * L);
    audit(r, "interval_lambda1_oracle", std::abs(sd.eigenvalues[0] / lam - 1.0) < 1e-2, false,
          "continuum " + fmt(lam));
  }
}

void run_heatcontent(const ExperimentConfig& c, RunResult& r) {
  const Domain d = make_config_domain(c);
  const auto mesh = share(build_mesh(c, d));
  const SpectralData sd = eigensolve(mesh, c.mesh.at("k").get<int>(), solve_options(c));
  std::vector<double> ts = to_doubles(c.mc.at("t_list"));
  if (ts.empty()) ts.push_back(c.mc.at("t").get<double>());
  const std::uint64_t N = c.mc.at("N");
  const bool mc = N > 0 && d.space().kind == SpaceKind::euclidean;
  std::vector<Point> qn;
  std::vector<double> qw;
  if (mc) {
    const double qh = c.mc.at("quadrature_h").get<double>() > 0.0 ? c.mc.at("quadrature_h").get<double>()
                                                                   : c.mesh.at("h").get<double>();
    const OperatorMesh q = assemble_euclidean(d, qh);
    qn = q.nodes;
    qw = q.weights;
  }
  r.results.header = {"t", "Q_series", "asymptote", "scaled", "Q_mc", "Q_mc_ci95"};
  const Process proc = d.space().kind == SpaceKind::gasket ? Process{} : make_process(d.space());
  bool decreasing = true, agree = true;
  double prev = INFINITY;
  std::string detail;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double t = ts[j];
    const HeatContent hc = heat_content_series(sd, t);
    double qm = NAN, qci = NAN;
    if (mc) {
      const HeatContentEstimate e = heat_content_estimate(proc, d, qn, qw, t, N, c.mc.at("h_t"),
                                                          c.seed + j, c.mc.at("bridge_correction"));
      qm = e.Q;
      qci = e.ci95;
      const bool ok = std::abs(qm - hc.Q) <= std::max(0.03 * hc.Q, qci);
      agree = agree && ok;
      detail += "t=" + fmt(t) + " rel " + fmt((qm - hc.Q) / hc.Q) + "; ";
    }
    decreasing = decreasing && hc.Q <= prev;
    prev = hc.Q;
    r.results.add({fmt(t), fmt(hc.Q), fmt(hc.asymptote), fmt(std::exp(sd.eigenvalues[0] * t) * hc.Q), fmt(qm),
                   fmt(qci)});
  }
  audit(r, "heat_content_decreasing", decreasing, true);
  audit(r, "asymptote_positive", heat_content_series(sd, 0.0).asymptote > 0.0, true);
  if (mc)
    audit(r, "mc_vs_series", agree, c.mc.at("required"), detail);
  else
    skip(r, "mc_vs_series", "no Monte Carlo budget");
  r.summary["lambda1"] = sd.eigenvalues.front();
  r.summary["quadrature_nodes"] = qn.size();
}

void run_smalldev(const ExperimentConfig& c, RunResult& r) {
  const Domain d = make_config_domain(c);
  const std::string shape = c.domain.at("shape");
  Gauge gauge{GaugeKind::euclidean_norm, 1.0};
  Point x{};
  double radius = 1.0;
  if (shape == "interval") {
    x = {0.5 * (c.domain.at("a").get<double>() + c.domain.at("b").get<double>()), 0.0, 0.0};
    radius = 0.5 * (c.domain.at("b").get<double>() - c.domain.at("a").get<double>());
  } else if (shape == "ball") {
    gauge = Gauge{gauge_kind_from_string(c.domain.at("gauge")), 1.0};
    x = to_point(c.domain.at("center"));
    radius = c.domain.at("radius");
  } else {
    throw ConfigError("config: domain.shape: smalldev needs an interval or ball");
  }
  if (std::abs(radius - 1.0) > 1e-12) throw ConfigError("config: domain: smalldev needs a unit ball");
  const auto mesh = share(build_mesh(c, d));
  const SpectralData sd = eigensolve(mesh, c.mesh.at("k").get<int>(), solve_options(c));
  const std::size_t node = nearest_node(*mesh, x);
  const double lam = sd.eigenvalues[0];
  const double target = sd.coefficients[0] * sd.eigenfunctions(static_cast<Eigen::Index>(node), 0);
  std::vector<double> eps = to_doubles(c.mc.at("eps_list"));
  if (eps.empty()) eps = {0.6, 0.5, 0.4};
  const auto rows = small_deviation_estimate(make_process(d.space()), x, gauge, c.mc.at("t"), eps, c.mc.at("N"),
                                             c.mc.at("h_t"), lam, 2.0, c.seed, c.mc.at("bridge_correction"));
  r.results.header = {"eps", "probability", "probability_ci95", "scaled", "scaled_ci95", "neg_log", "target"};
  const double t = c.mc.at("t");
  bool ok = true;
  std::string detail;
  for (const auto& row : rows) {
    const double amp = std::exp(lam * t / (row.eps * row.eps));
    r.results.add({fmt(row.eps), fmt(row.probability), fmt(row.ci95), fmt(row.scaled), fmt(amp * row.ci95),
                   fmt(row.neg_log), fmt(target)});
    const bool good = !row.flagged && std::abs(row.scaled / target - 1.0) <= 0.1;
    ok = ok && good;
    detail += "eps=" + fmt(row.eps) + " ratio " + fmt(row.scaled / target) + "; ";
  }
  audit(r, "scaled_vs_ground_state", ok, c.mc.at("required"), detail);
  const auto& last = rows.back();
  audit(r, "neg_log_vs_lambda1", !last.flagged && std::abs(last.neg_log / (lam * t) - 1.0) <= 0.1,
        c.mc.at("required"), "neg_log " + fmt(last.neg_log) + " lambda1 " + fmt(lam));
  r.summary["lambda1"] = lam;
  r.summary["target"] = target;
}

void run_dilation(const ExperimentConfig& c, RunResult& r) {
  const std::string kind = c.dilation.at("kind");
  if (kind == "gasket") {
    std::vector<int> levels;
    for (const auto& l : c.dilation.at("levels")) levels.push_back(l.get<int>());
    const GasketScalingReport g = gasket_eigen_scaling(levels, c.mesh.at("k").get<int>());
    r.results.header = {"level", "nodes", "lambda1", "lambda1_graph", "graph_ratio", "decimation_ratio"};
    bool ascending = true;
    for (std::size_t i = 0; i < g.levels.size(); ++i) {
      const auto& L = g.levels[i];
      ascending = ascending && std::is_sorted(L.renormalized.begin(), L.renormalized.end()) && L.renormalized[0] > 0;
      const bool has = i < g.graph_ratio.size();
      r.results.add({fmt(L.level), fmt(static_cast<std::uint64_t>(L.nodes)), fmt(L.renormalized[0]),
                     fmt(L.graph[0]), fmt(has ? g.graph_ratio[i] : NAN), fmt(has ? g.decimation_ratio[i] : NAN)});
    }
    audit(r, "eigenvalues_ascending_positive", ascending, true);
    bool near5 = !g.graph_ratio.empty();
    for (double q : g.graph_ratio) near5 = near5 && std::abs(q / 5.0 - 1.0) <= 0.03;
    audit(r, "graph_ratio_near_5", near5, false);
    audit(r, "envelope_c_below_2", g.envelope_c < 2.0, false, "c = " + fmt(g.envelope_c));
    r.summary["envelope_c"] = g.envelope_c;
    return;
  }
  if (kind != "euclidean" && kind != "carnot") throw ConfigError("config: dilation.kind: unknown kind '" + kind + "'");
  const Domain d = make_config_domain(c);
  const bool carnot = kind == "carnot";
  if (carnot != (d.space().kind == SpaceKind::heisenberg3))
    throw ConfigError("config: dilation.kind: does not match space.kind");
  const DilationStructure ds = carnot ? carnot_dilation(4.0) : euclidean_dilation(d.space().dim);
  const double rr = c.dilation.at("r");
  r.results.header = {"quantity", "r", "expected", "observed", "observed_ci95"};

  const DilationElement g = ds.element(rr), g2 = ds.element(1.0 / (rr + 1.0));
  const double jm = ds.jacobian(ds.compose(g, g2)) / (ds.jacobian(g) * ds.jacobian(g2));
  audit(r, "jacobian_multiplicative", std::abs(jm - 1.0) < 1e-12, true);
  r.results.add({"ell", fmt(rr), fmt(rr * rr), fmt(ds.ell(g)), "nan"});
  audit(r, "ell_equals_r_squared", std::abs(ds.ell(g) / (rr * rr) - 1.0) < 1e-12, true);

  const double h = c.mesh.at("h");
  const Domain big = dilate_domain(d, rr);
  OperatorMesh small_m, large_m;
  if (carnot) {
    const double hz = c.mesh.at("h_z").get<double>() > 0.0 ? c.mesh.at("h_z").get<double>() : h;
    small_m = assemble_heisenberg(d, h, hz);
    large_m = assemble_heisenberg(big, rr * h, rr * rr * hz);
  } else {
    small_m = assemble_euclidean(d, h);
    large_m = assemble_euclidean(big, rr * h);
  }
  const EnergyScalingReport e =
      verify_energy_scaling(ds, small_m, large_m, rr, c.dilation.at("samples").get<int>(), c.seed);
  r.results.add({"energy_ratio", fmt(rr), fmt(e.expected), fmt(e.ratio_mean), "nan"});
  audit(r, "energy_scaling", e.pass, true, "range [" + fmt(e.ratio_min) + ", " + fmt(e.ratio_max) + "]");

  if (small_m.size() <= 2000) {
    const FactorizationReport f = verify_semigroup_factorization(ds, small_m, large_m, rr, c.dilation.at("t"), 20,
                                                                 c.seed + 1);
    r.results.add({"factorization_deviation", fmt(rr), "0", fmt(f.max_relative_deviation), "nan"});
    for (std::size_t n = 0; n < f.eigen_ratio.size(); ++n)
      r.results.add({"eigen_ratio_" + std::to_string(n + 1), fmt(rr), "1", fmt(f.eigen_ratio[n]), "nan"});
    audit(r, "semigroup_factorization", f.pass, true, "deviation " + fmt(f.max_relative_deviation));
  } else {
    skip(r, "semigroup_factorization", "mesh above 2000 nodes");
  }

  if (!carnot) {
    const int n = d.space().dim;
    const Point p{0.1, -0.2, 0.3}, q{-0.4, 0.25, 0.05};
    const double t = 0.3;
    const Point gp = Gauge{}.dilate(p, rr), gq = Gauge{}.dilate(q, rr);
    const double lhs = std::pow(rr, -n) * gaussian_heat_kernel(t, p, q, n, d.space().scale);
    const double rhs = gaussian_heat_kernel(rr * rr * t, gp, gq, n, d.space().scale);
    r.results.add({"kernel_identity", fmt(rr), fmt(lhs), fmt(rhs), "nan"});
    audit(r, "kernel_dilation_identity", std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs), true);
  }

  const std::uint64_t N = c.mc.at("N");
  if (N > 0) {
    const Process proc = make_process(d.space());
    const Point x = to_point(c.mc.at("start"));
    const ScalingCheck s = exit_scaling_check(proc, d, x, rr, c.mc.at("t"), N, c.mc.at("h_t"), c.seed);
    r.results.add({"exit_dilated", fmt(rr), fmt(s.base.estimate), fmt(s.dilated.estimate), fmt(s.dilated.ci95)});
    audit(r, "exit_time_scaling", s.agree, c.mc.at("required"),
          "difference " + fmt(s.difference) + " joint ci " + fmt(s.joint_ci95));
    const auto ex = c.dilation.at("exponents");
    const auto ep = c.dilation.at("epsilons");
    if (!ex.empty() || !ep.empty()) {
      OrchestratorConfig oc;
      oc.ds = ds;
      oc.ds.r0 = c.dilation.at("r0");
      oc.process = proc;
      oc.x = x;
      oc.t = c.mc.at("t");
      for (const auto& v : ex) oc.exponents.push_back(v.get<int>());
      oc.epsilons = to_doubles(ep);
      oc.N = N;
      oc.h_t = c.mc.at("h_t");
      oc.seed = c.seed + 7;
      oc.bridge_correction = c.mc.at("bridge_correction");
      const auto mesh = share(build_mesh(c, d));
      const SpectralData sd = eigensolve(mesh, c.mesh.at("k").get<int>(), solve_options(c));
      const OrchestratorResult o = small_deviation_orchestrator(oc, d, sd);
      Table t;
      t.header = {"key", "value", "r", "ell", "probability", "probability_ci95", "scaled", "scaled_ci95", "target",
                  "series"};
      for (const auto& row : o.rows)
        t.add({row.key, fmt(row.value), fmt(row.r), fmt(row.ell), fmt(row.probability), fmt(row.ci95),
               fmt(row.scaled), fmt(row.scaled_ci95), fmt(row.target), fmt(row.series)});
      r.extra["orchestrator"] = t;
      r.summary["orchestrator_target"] = o.target;
      r.summary["lambda1"] = o.lambda1;
    }
  } else {
    skip(r, "exit_time_scaling", "no Monte Carlo budget");
  }
}

void run_contraction(const ExperimentConfig& c, RunResult& r) {
  const auto& k = c.contraction;
  std::vector<double> rho = to_doubles(k.at("rho_grid"));
  if (rho.empty())
    for (int i = 1; i <= 20; ++i) rho.push_back(0.1 * i);
  const CoefficientTable ct = coefficient_convergence(to_doubles(k.at("coef_r_list")), rho);
  const HaarTable ht = haar_density_ratio(to_doubles(k.at("coef_r_list")), rho);
  audit(r, "coefficient_rate", std::abs(ct.rate - 2.0) <= 0.3, true, "rate " + fmt(ct.rate));
  audit(r, "haar_rate", std::abs(ht.rate - 2.0) <= 0.3, true, "rate " + fmt(ht.rate));
  Table t1;
  t1.header = {"r", "rho", "c_rho", "c_theta2", "c_z2", "c_thetaz", "max_deviation"};
  for (const auto& row : ct.rows)
    t1.add({fmt(row.r), fmt(row.rho), fmt(row.value[1]), fmt(row.value[2]), fmt(row.value[3]), fmt(row.value[4]),
            fmt(row.max_deviation)});
  r.extra["coefficients"] = t1;
  Table t2;
  t2.header = {"r", "rho", "ratio"};
  for (const auto& row : ht.rows) t2.add({fmt(row.r), fmt(row.rho), fmt(row.ratio)});
  r.extra["haar"] = t2;

  Table t3;
  t3.header = {"r", "min_gauge", "max_gauge", "margin"};
  bool contained = true, shrinking = true;
  double prev = INFINITY;
  for (double rr : to_doubles(k.at("sandwich_r"))) {
    const SandwichReport s = ball_sandwich_check(rr, k.at("eps_tol"));
    t3.add({fmt(rr), fmt(s.min_gauge), fmt(s.max_gauge), fmt(s.margin)});
    contained = contained && s.contained;
    shrinking = shrinking && s.margin <= prev;
    prev = s.margin;
  }
  r.extra["sandwich"] = t3;
  audit(r, "ball_sandwich", contained && shrinking, false);

  const Domain d = make_config_domain(c);
  if (d.space().kind != SpaceKind::heisenberg3) throw ConfigError("config: space.kind: contraction needs heisenberg");
  const ContractionTable tab =
      eigenvalue_contraction_experiment(to_doubles(k.at("r_list")), d, cylindrical_grid(c, d), c.mesh.at("k"));
  r.results.header = {"r", "n", "eigenvalue", "gap_to_limit", "rate_estimate"};
  for (const auto& row : tab.rows)
    r.results.add({fmt(row.r), fmt(row.n), fmt(row.eigenvalue), fmt(row.gap_to_limit), fmt(row.rate_estimate)});
  audit(r, "eigenvalues_ordered", tab.ordered, true);
  audit(r, "gap_monotone", tab.monotone, false);
  audit(r, "final_gap_below_2pct", tab.final_gap_max < 0.02, false, "gap " + fmt(tab.final_gap_max));
  audit(r, "multiplicity_pattern", tab.clusters_reproduced, false);
  r.summary["bracket_defect_eps_0.01"] = bracket_defect(0.01, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0});

  if (k.at("smalldev").get<bool>()) {
    double lam = k.at("lambda_h");
    if (!(lam > 0.0)) {
      const Domain b = make_domain(SpaceModel::heisenberg(GeneratorScale::probabilist),
                                   ball(Gauge{GaugeKind::koranyi, 1.0}, 1.0), "koranyi_ball");
      const double h = c.mesh.at("h");
      lam = eigensolve(share(assemble_heisenberg(b, h, 0.25 * h)), 1, solve_options(c)).eigenvalues[0];
    }
    SmallDeviationConfig sc;
    const auto eps = to_doubles(c.mc.at("eps_list"));
    if (!eps.empty()) sc.epsilons = eps;
    sc.t = c.mc.at("t");
    if (c.mc.at("particles").get<std::uint64_t>() > 0) sc.particles = c.mc.at("particles");
    sc.replicates = c.mc.at("replicates");
    sc.h_rel = c.mc.at("h_rel");
    sc.stage_rel = c.mc.at("stage_rel");
    sc.seed = c.seed;
    const SmallDeviationExperiment e = su2_small_deviation_experiment(sc, lam);
    Table t4;
    t4.header = {"process", "eps", "probability", "neg_log", "neg_log_ci95", "decay", "decay_ci95", "lambda_h"};
    for (const auto* rows : {&e.su2, &e.heisenberg})
      for (const auto& row : *rows)
        t4.add({row.process, fmt(row.eps), fmt(row.probability), fmt(row.neg_log), fmt(row.neg_log_ci95),
                fmt(row.decay), fmt(row.decay_ci95), fmt(lam)});
    r.extra["smalldev"] = t4;
    const bool req = c.mc.at("required");
    audit(r, "su2_neg_log_within_15pct", e.su2_max_rel_error <= 0.15, req, "max rel " + fmt(e.su2_max_rel_error));
    audit(r, "su2_neg_log_flat", e.su2_flat, req);
    audit(r, "heisenberg_neg_log_flat", e.heisenberg_flat, req);
    audit(r, "su2_decay_flat", e.su2_decay_flat, req);
    r.summary["lambda_h"] = lam;
  } else {
    skip(r, "su2_small_deviation", "contraction.smalldev is false");
  }
}

void run_kernel_bounds(const ExperimentConfig& c, RunResult& r) {
  const auto& b = c.bounds;
  const std::string fam = b.at("family");
  const auto num = [&](const char* k) { return b.at(k).get<double>(); };
  KernelBound kb = [&] {
    if (fam == "gaussian_ahlfors") return KernelBound::gaussian_ahlfors(num("C1"), num("C2"), num("K1"), num("K2"), num("alpha"));
    if (fam == "sub_gaussian")
      return KernelBound::sub_gaussian(num("c1"), num("c2"), num("c3"), num("c4"), num("alpha"), num("beta"));
    if (fam == "polynomial") return KernelBound::polynomial_nonlocal(num("c1"), num("c2"), num("alpha"), num("beta"));
    if (fam == "lie_group") return KernelBound::lie_group(num("kappa"), num("c1"), num("c2"), num("c3"), num("nu"));
    throw ConfigError("config: bounds.family: unknown family '" + fam + "'");
  }();
  r.results.header = {"t", "d", "lower", "upper"};
  bool ordered = true;
  for (double t : to_doubles(b.at("t_list")))
    for (double d : to_doubles(b.at("d_list"))) {
      const Envelope e = envelope(kb, t, d);
      ordered = ordered && e.lower <= e.upper;
      r.results.add({fmt(t), fmt(d), fmt(e.lower), fmt(e.upper)});
    }
  audit(r, "lower_below_upper", ordered, true);
  const LambdaConstant lc = lambda_envelope_constant(kb, num("lambda"));
  r.summary["lambda_constant"] = lc.value;
  r.summary["lambda_constant_t_star"] = lc.t_star;
  const GapCondition gc = spectral_gap_condition(kb, num("volume"));
  r.summary["gap_condition"] = gc.satisfied;
  if (gc.witness_t) r.summary["gap_witness_t"] = *gc.witness_t;
  if (const auto pl = power_law(kb)) {
    r.summary["power_law_C"] = pl->C;
    r.summary["power_law_gamma"] = pl->gamma;
  }
  if (fam == "lie_group") r.summary["good_set_threshold"] = good_set_threshold(num("kappa"), num("nu"));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind k) { return kKinds.at(static_cast<std::size_t>(k)); }

ExperimentKind experiment_kind_from_string(const std::string& s) {
  const auto it = std::find(kKinds.begin(), kKinds.end(), s);
  if (it == kKinds.end()) throw ConfigError("config: kind: unknown kind '" + s + "'");
  return static_cast<ExperimentKind>(it - kKinds.begin());
}

const std::vector<std::string>& experiment_kinds() { return kKinds; }

json ExperimentConfig::to_json() const {
  return {{"kind", to_string(kind)}, {"seed", seed},     {"output_dir", output_dir}, {"space", space},
          {"domain", domain},        {"mesh", mesh},     {"mc", mc},                 {"dilation", dilation},
          {"bounds", bounds},        {"contraction", contraction}};
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto nl = std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n');
    const std::size_t bol = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t col = bol == std::string::npos ? at + 1 : at - bol;
    throw ConfigError("config: syntax error at line " + std::to_string(nl + 1) + ", column " + std::to_string(col));
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::vector<std::string> top{"kind", "seed",     "output_dir", "space",  "domain",
                                            "mesh", "mc",       "dilation",   "bounds", "contraction"};
  for (const auto& [k, v] : j.items())
    if (std::find(top.begin(), top.end(), k) == top.end()) fail(text, "", k, "unknown field");
  ExperimentConfig c;
  if (!j.contains("kind") || !j.at("kind").is_string()) fail(text, "", "kind", "required string field");
  try {
    c.kind = experiment_kind_from_string(j.at("kind"));
  } catch (const ConfigError&) {
    fail(text, "", "kind", "unknown kind '" + j.at("kind").get<std::string>() + "'");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) fail(text, "", "seed", "expected a nonnegative integer");
    c.seed = j.at("seed");
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) fail(text, "", "output_dir", "expected string");
    c.output_dir = j.at("output_dir");
  }
  const auto sec = [&](const char* name) { return j.contains(name) ? j.at(name) : json(); };
  c.space = resolve_section(text, "space", sec("space"));
  c.domain = resolve_domain(text, sec("domain"));
  c.mesh = resolve_section(text, "mesh", sec("mesh"));
  c.mc = resolve_section(text, "mc", sec("mc"));
  c.dilation = resolve_section(text, "dilation", sec("dilation"));
  c.bounds = resolve_section(text, "bounds", sec("bounds"));
  c.contraction = resolve_section(text, "contraction", sec("contraction"));
  // Value checks that do not need the numerical modules.
  try {
    make_space(c.space);
  } catch (const InvalidArgument& e) {
    fail(text, "space", "kind", e.what());
  }
  if (!(c.mesh.at("h").get<double>() > 0.0)) fail(text, "mesh", "h", "must be positive");
  if (c.mesh.at("k").get<int>() < 1) fail(text, "mesh", "k", "must be >= 1");
  if (c.mc.at("N").get<double>() < 0.0) fail(text, "mc", "N", "must be >= 0");
  if (!(c.mc.at("h_t").get<double>() > 0.0)) fail(text, "mc", "h_t", "must be positive");
  return c;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------

void Table::add(const std::vector<std::string>& row) {
  if (row.size() != header.size()) throw InvalidArgument("table row width does not match the header");
  rows.push_back(row);
}

std::string Table::csv() const {
  std::string out;
  const auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += v[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

Table Table::parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string l;
  bool first = true;
  while (std::getline(in, l)) {
    if (l.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw ConfigError("csv: row width does not match the header");
      t.rows.push_back(cells);
    }
  }
  return t;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

bool RunResult::hard_pass() const {
  return std::none_of(audits.begin(), audits.end(), [](const Audit& a) { return a.hard && a.status == "fail"; });
}

json RunResult::report() const {
  json a = json::array();
  for (const auto& x : audits)
    a.push_back({{"name", x.name}, {"status", x.status}, {"hard", x.hard}, {"detail", x.detail}});
  json extra_names = json::array();
  for (const auto& [k, v] : extra) extra_names.push_back(k + ".csv");
  return {{"kind", to_string(kind)}, {"hard_pass", hard_pass()}, {"audits", a},
          {"summary", summary},      {"tables", extra_names}};
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult r;
  r.kind = cfg.kind;
  r.resolved = cfg.to_json();
  switch (cfg.kind) {
    case ExperimentKind::spectrum: run_spectrum(cfg, r); break;
    case ExperimentKind::smalldev: run_smalldev(cfg, r); break;
    case ExperimentKind::heatcontent: run_heatcontent(cfg, r); break;
    case ExperimentKind::dilation_check: run_dilation(cfg, r); break;
    case ExperimentKind::contraction: run_contraction(cfg, r); break;
    case ExperimentKind::kernel_bounds: run_kernel_bounds(cfg, r); break;
  }
  return r;
}

void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw NumericalError("cannot write " + (dir / name).string());
    out << body;
  };
  put("results.csv", r.results.csv());
  for (const auto& [k, v] : r.extra) put(k + ".csv", v.csv());
  put("report.json", r.report().dump(2) + "\n");
  put("resolved_config.json", r.resolved.dump(2) + "\n");
}

double compare_tolerance(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::spectrum: return 0.02;
    case ExperimentKind::heatcontent: return 0.03;
    case ExperimentKind::smalldev: return 0.1;
    case ExperimentKind::dilation_check: return 0.02;
    case ExperimentKind::contraction: return 0.02;
    case ExperimentKind::kernel_bounds: return 1e-9;
  }
  return 0.0;
}

CompareResult compare_runs(const std::filesystem::path& a, const std::filesystem::path& b, double tolerance) {
  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("compare: cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const json ra = json::parse(slurp(a / "report.json"));
  const json rb = json::parse(slurp(b / "report.json"));
  if (ra.at("kind") != rb.at("kind")) throw ConfigError("compare: runs have different kinds");
  CompareResult out;
  out.kind = ra.at("kind");
  out.tolerance = tolerance >= 0.0 ? tolerance : compare_tolerance(experiment_kind_from_string(out.kind));
  const Table ta = Table::parse_csv(slurp(a / "results.csv"));
  const Table tb = Table::parse_csv(slurp(b / "results.csv"));
  if (ta.header != tb.header || ta.rows.size() != tb.rows.size())
    throw ConfigError("compare: results.csv schemas differ");
  const auto num = [](const std::string& s, double& v) {
    if (s == "nan") return v = NAN, true;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
  };
  const auto col = [&](const std::string& name) -> long {
    const auto it = std::find(ta.header.begin(), ta.header.end(), name);
    return it == ta.header.end() ? -1 : static_cast<long>(it - ta.header.begin());
  };
  out.within = true;
  for (std::size_t i = 0; i < ta.rows.size(); ++i) {
    for (std::size_t j = 0; j < ta.header.size(); ++j) {
      const std::string& name = ta.header[j];
      if (name.size() > 5 && name.compare(name.size() - 5, 5, "_ci95") == 0) continue;
      double x, y;
      const bool nx = num(ta.rows[i][j], x), ny = num(tb.rows[i][j], y);
      if (!nx || !ny) {
        if (ta.rows[i][j] != tb.rows[i][j]) throw ConfigError("compare: key column '" + name + "' differs");
        continue;
      }
      if ((std::isnan(x) && std::isnan(y)) || x == y) continue;
      CellDiff d{name, i, x, y, 0.0, false};
      const long ci = col(name + "_ci95");
      double cx = NAN, cy = NAN;
      if (ci >= 0 && num(ta.rows[i][ci], cx) && num(tb.rows[i][ci], cy) && std::isfinite(cx) && std::isfinite(cy)) {
        const double joint = 3.0 * std::hypot(cx, cy);
        d.relative = joint > 0.0 ? std::abs(x - y) / joint : INFINITY;
        d.exceeds = d.relative > 1.0;
      } else {
        const double scale = std::max(std::abs(x), std::abs(y));
        d.relative = scale > 0.0 ? std::abs(x - y) / scale : 0.0;
        d.exceeds = !(d.relative <= out.tolerance);
      }
      out.within = out.within && !d.exceeds;
      out.diffs.push_back(d);
    }
  }
  return out;
}

}  // namespace dirlab
