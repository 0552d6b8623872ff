// Command-line front end: load a field spec (registry model or JSON), run
// verification / diagnosis / solving / tracing, emit CSV and JSON artifacts.
//
// Exit codes: 0 success, 2 validation or usage failure, 3 negative verdict
// (divergent gap, unsolvable right-hand side, failed positivity, ...), so
// shell pipelines can branch on the outcome.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "planarcoh/fieldspec.hpp"
#include "planarcoh/registry.hpp"

using nlohmann::json;
using namespace pcoh;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitVerdict = 3;

void writeAtomic(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
  }
  fs::rename(tmp, target);
}

const char* className(SeqClass c) {
  switch (c) {
    case SeqClass::Finite: return "finite";
    case SeqClass::Divergent: return "divergent";
    default: return "inconclusive";
  }
}

TimeParam parseTime(const std::string& s) {
  if (s == "field") return TimeParam::Field;
  if (s == "hamiltonian") return TimeParam::Hamiltonian;
  throw CLI::ValidationError("--time must be 'field' or 'hamiltonian'");
}

json gapJson(const GapResult& r) {
  json j;
  j["pair"] = r.pair_id;
  j["k"] = r.order;
  j["time"] = r.time == TimeParam::Field ? "field" : "hamiltonian";
  j["class"] = className(r.cls);
  if (r.cls == SeqClass::Finite) j["value"] = r.value;
  j["rate"] = r.rate;
  j["partials"] = r.partials;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

json chartJson(const ModelContext& ctx) {
  json j;
  j["separatrices"] = json::array();
  for (const auto& sep : ctx.chart.seps)
    j["separatrices"].push_back({{"id", sep.id},
                                 {"desc", sep.desc.str()},
                                 {"F_level", sep.F_level},
                                 {"inseparable_from", sep.inseparable_from}});
  j["transversals"] = json::array();
  for (const auto& [id, t] : ctx.chart.cst)
    j["transversals"].push_back(
        {{"separatrix", id},
         {"level", t.level},
         {"anchor", json::array({t.anchor.x, t.anchor.y})}});
  j["pairs"] = json::array();
  for (const auto& pair : ctx.chart.pairs) {
    json jp = {{"id", pair.id},
               {"a", pair.a},
               {"p1", json::array({pair.p1.x, pair.p1.y})},
               {"p2", json::array({pair.p2.x, pair.p2.y})}};
    try {
      const GermInterval iv = germInterval(ctx.chart, ctx.dp, pair);
      jp["interval"] = {{"a", iv.a}, {"b1", iv.b1}, {"b2", iv.b2}};
    } catch (const std::exception&) {
      // interval extraction is best-effort in reports
    }
    j["pairs"].push_back(jp);
  }
  return j;
}

struct CommonArgs {
  std::string model;
  std::string spec_path;
  std::vector<double> box;
  std::uint64_t seed = 24001;
  std::string out;
};

void addCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--model", a.model, "registry model, e.g. ex51:1 or ex52:2");
  cmd->add_option("--spec", a.spec_path, "path to a JSON field spec");
  cmd->add_option("--box", a.box, "working box x1 x2 y1 y2")->expected(4);
  cmd->add_option("--seed", a.seed, "seed for all sampling");
  cmd->add_option("--out", a.out, "output file ('-' = stdout)");
}

ModelContext loadContext(const CommonArgs& a) {
  FieldSpec spec;
  if (!a.spec_path.empty()) {
    std::ifstream is(a.spec_path);
    if (!is) throw ValidationError("cannot read spec file '" + a.spec_path + "'");
    json j;
    is >> j;
    spec = specFromJson(j);
  } else if (!a.model.empty()) {
    spec.model = a.model;
  } else {
    throw ValidationError("either --model or --spec is required");
  }
  if (!a.box.empty()) spec.box = Box{a.box[0], a.box[1], a.box[2], a.box[3]};
  if (!spec.model.empty() && spec.fx.empty())
    spec = registryModel(spec.model, spec.box);
  return buildContext(spec, a.seed);
}

std::string csvDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar cohomological-equation toolkit"};
  app.require_subcommand(1);

  CommonArgs ca;

  // --- verify ---------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "check the derived-pair relation suite");
  int verify_samples = 10000;
  double verify_tol = 1e-8;
  addCommon(verify, ca);
  verify->add_option("--samples", verify_samples);
  verify->add_option("--tol", verify_tol, "acceptance threshold for the max residual");

  // --- diagnose -------------------------------------------------------
  auto* diag = app.add_subcommand("diagnose", "solvability verdict from the gap ladder");
  std::string diag_g;
  int diag_kmax = 4;
  std::string diag_time = "hamiltonian";
  int diag_steps = 12;
  double diag_tol = 1e-10;
  addCommon(diag, ca);
  diag->add_option("--g", diag_g, "right-hand side g(x, y)")->required();
  diag->add_option("--kmax", diag_kmax);
  diag->add_option("--time", diag_time, "gap parametrization: hamiltonian | field");
  diag->add_option("--steps", diag_steps, "schedule points per gap");
  diag->add_option("--tol", diag_tol, "integration tolerance");

  // --- gap --------------------------------------------------------------
  auto* gapc = app.add_subcommand("gap", "single gap between an adjacent pair");
  std::string gap_g;
  int gap_k = 0, gap_pair = 0, gap_steps = 12;
  double gap_d0 = 0.5, gap_tol = 1e-10;
  std::string gap_time = "field";
  addCommon(gapc, ca);
  gapc->add_option("--g", gap_g)->required();
  gapc->add_option("--k", gap_k, "order of the transversal derivative");
  gapc->add_option("--pair", gap_pair, "index of the adjacent pair");
  gapc->add_option("--steps", gap_steps);
  gapc->add_option("--d0", gap_d0, "first transversal offset of the schedule");
  gapc->add_option("--time", gap_time, "field | hamiltonian");
  gapc->add_option("--tol", gap_tol, "integration tolerance");

  // --- solve --------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "method-of-characteristics solution grid");
  std::string solve_g, solve_initial, solve_time = "hamiltonian";
  std::vector<int> solve_grid{81, 81};
  std::vector<double> solve_grid_box;
  double solve_tol = 1e-10;
  bool solve_force = false;
  addCommon(solve, ca);
  solve->add_option("--g", solve_g)->required();
  solve->add_option("--grid", solve_grid, "NX NY")->expected(2);
  solve->add_option("--grid-box", solve_grid_box, "output window x1 x2 y1 y2 (default: the working box)")
      ->expected(4);
  solve->add_option("--initial", solve_initial, "initial data on every transversal");
  solve->add_option("--time", solve_time);
  solve->add_option("--tol", solve_tol, "integration tolerance");
  solve->add_flag("--force", solve_force, "keep going past divergent continuations");

  // --- order --------------------------------------------------------------
  auto* order = app.add_subcommand("order", "regularity ladder of a rectified-plane function");
  std::string order_ghat;
  int order_interval = 0, order_rmax = 3, order_steps = 12;
  double order_eps = 0.5;
  addCommon(order, ca);
  order->add_option("--ghat", order_ghat, "function of the rectified variables (write x, y)")
      ->required();
  order->add_option("--interval", order_interval, "adjacent-pair index");
  order->add_option("--rmax", order_rmax);
  order->add_option("--eps", order_eps, "widening of the separating interval");
  order->add_option("--steps", order_steps);

  // --- trace --------------------------------------------------------------
  auto* trace = app.add_subcommand("trace", "trace the leaf through a point");
  std::vector<double> trace_p0{0.0, 0.0};
  double trace_tmax = 1e4, trace_ds = 0.05;
  addCommon(trace, ca);
  trace->add_option("--p0", trace_p0, "starting point")->expected(2);
  trace->add_option("--tmax", trace_tmax);
  trace->add_option("--ds", trace_ds, "polyline spacing");

  // --- positivity -----------------------------------------------------------
  auto* posi = app.add_subcommand("positivity", "transversally-Hamiltonian certificate");
  int posi_depth = 8, posi_samples = 1000;
  addCommon(posi, ca);
  posi->add_option("--depth", posi_depth, "window truncation per separatrix");
  posi->add_option("--samples", posi_samples);

  // --- spec ---------------------------------------------------------------
  auto* specc = app.add_subcommand("spec", "dump the resolved field spec as JSON");
  addCommon(specc, ca);

  CLI11_PARSE(app, argc, argv);

  try {
    if (specc->parsed()) {
      FieldSpec s;
      if (!ca.spec_path.empty()) {
        std::ifstream is(ca.spec_path);
        if (!is) throw ValidationError("cannot read spec file '" + ca.spec_path + "'");
        json j;
        is >> j;
        s = specFromJson(j);
      } else if (!ca.model.empty()) {
        s.model = ca.model;
      } else {
        throw ValidationError("either --model or --spec is required");
      }
      if (!ca.box.empty()) s.box = Box{ca.box[0], ca.box[1], ca.box[2], ca.box[3]};
      s = resolveSpec(s);
      writeAtomic(ca.out.empty() ? "-" : ca.out, specToJson(s).dump(2) + "\n");
      return kExitOk;
    }

    const ModelContext ctx = loadContext(ca);

    if (verify->parsed()) {
      Rng rng(ca.seed);
      const auto collar = degeneracyCollar(ctx.chart.seps, ctx.ham);
      const RelationReport rep =
          verifyRelations(ctx.dp, ctx.chart.box, verify_samples, rng, collar);
      json j;
      j["schema"] = 1;
      j["model"] = ctx.spec.name;
      j["samples"] = rep.samples;
      j["skipped_collar"] = rep.skipped_collar;
      j["relations"] = json::array();
      for (const auto& e : rep.entries) {
        json je = {{"id", e.id}, {"checked", e.checked}, {"implied", e.implied}};
        if (!e.implied) je["max_residual"] = e.max_residual;
        j["relations"].push_back(je);
      }
      j["max_residual"] = rep.maxResidual();
      j["tol"] = verify_tol;
      const bool pass = rep.maxResidual() <= verify_tol;
      j["pass"] = pass;
      writeAtomic(ca.out.empty() ? "-" : ca.out, j.dump(2) + "\n");
      return pass ? kExitOk : kExitVerdict;
    }

    if (diag->parsed()) {
      GapSchedule sched = diagnoseSchedule();
      sched.time = parseTime(diag_time);
      sched.steps = diag_steps;
      sched.tol = diag_tol;
      const SolvabilityVerdict v =
          diagnose(ctx.chart, ctx.dp, Expr::parse(diag_g), diag_kmax, sched);
      json j;
      j["schema"] = 1;
      j["model"] = ctx.spec.name;
      j["g"] = diag_g;
      j["kmax"] = diag_kmax;
      j["time"] = diag_time;
      j["solvable_to_order"] = v.solvable_to_order;
      j["inconclusive"] = v.inconclusive;
      j["table"] = json::array();
      for (const auto& row : v.table) j["table"].push_back(gapJson(row.gap));
      j["chart"] = chartJson(ctx);
      writeAtomic(ca.out.empty() ? "-" : ca.out, j.dump(2) + "\n");
      return v.solvable_to_order >= 0 ? kExitOk : kExitVerdict;
    }

    if (gapc->parsed()) {
      if (gap_pair < 0 || gap_pair >= static_cast<int>(ctx.chart.pairs.size()))
        throw ValidationError("pair index out of range");
      GapSchedule sched;
      sched.time = parseTime(gap_time);
      sched.steps = gap_steps;
      sched.d0 = gap_d0;
      sched.tol = gap_tol;
      const GapResult r = gapBetween(ctx.chart, ctx.dp, Expr::parse(gap_g),
                                     ctx.chart.pairs[static_cast<std::size_t>(gap_pair)],
                                     gap_k, sched);
      json j = gapJson(r);
      j["schema"] = 1;
      j["model"] = ctx.spec.name;
      j["g"] = gap_g;
      writeAtomic(ca.out.empty() ? "-" : ca.out, j.dump(2) + "\n");
      return r.cls == SeqClass::Divergent ? kExitVerdict : kExitOk;
    }

    if (solve->parsed()) {
      GridSpec grid;
      grid.box = ctx.chart.box;
      if (!solve_grid_box.empty())
        grid.box = Box{solve_grid_box[0], solve_grid_box[1], solve_grid_box[2], solve_grid_box[3]};
      grid.nx = solve_grid[0];
      grid.ny = solve_grid[1];
      std::map<std::string, Expr> initial;
      if (!solve_initial.empty()) {
        const Expr init = Expr::parse(solve_initial);
        for (const auto& s : ctx.chart.seps) initial.emplace(s.id, init);
      }
      SolveOptions opt;
      opt.time = parseTime(solve_time);
      opt.tol = solve_tol;
      opt.force = solve_force;
      const SolutionGrid sol =
          solveGrid(ctx.chart, ctx.dp, Expr::parse(solve_g), grid, initial, opt);

      std::ostringstream os;
      os << "x,y,f,residual\n";
      for (std::size_t i = 0; i < sol.f.size(); ++i) {
        os << csvDouble(sol.xs[i]) << ',' << csvDouble(sol.ys[i]) << ',' << csvDouble(sol.f[i])
           << ',' << csvDouble(sol.residual[i]) << '\n';
      }
      writeAtomic(ca.out.empty() ? "-" : ca.out, os.str());

      json summary;
      summary["schema"] = 1;
      summary["initial_data_on"] = json::array();
      for (const auto& [id, e] : initial) summary["initial_data_on"].push_back(id);
      summary["max_residual"] = sol.maxResidual();
      summary["extension_failure"] = sol.extension_failure;
      if (sol.extension_failure) summary["failure_pair"] = sol.failure_pair;
      summary["stitches"] = json::array();
      for (const auto& st : sol.stitches) {
        summary["stitches"].push_back({{"transversal", st.sep_id},
                                       {"pair", st.pair_id},
                                       {"class", className(st.cls)},
                                       {"limit", st.limit},
                                       {"data_mismatch", st.data_mismatch}});
      }
      std::cerr << summary.dump(2) << "\n";
      return sol.extension_failure && !solve_force ? kExitVerdict : kExitOk;
    }

    if (order->parsed()) {
      if (order_interval < 0 || order_interval >= static_cast<int>(ctx.chart.pairs.size()))
        throw ValidationError("interval index out of range");
      const GermInterval iv = germInterval(
          ctx.chart, ctx.dp, ctx.chart.pairs[static_cast<std::size_t>(order_interval)]);
      const RegularityReport rep =
          estimateOrder(Expr::parse(order_ghat), iv, order_rmax, order_eps, order_steps);
      json j;
      j["schema"] = 1;
      j["model"] = ctx.spec.name;
      j["interval"] = {{"a", iv.a},   {"b1", iv.b1}, {"b2", iv.b2},
                       {"c1", iv.c1}, {"c2", iv.c2}, {"approach", iv.approach}};
      j["eps"] = order_eps;
      j["rmax"] = order_rmax;
      j["max_order"] = rep.max_order;
      j["inconclusive_halt"] = rep.inconclusive_halt;
      j["rungs"] = json::array();
      for (const auto& r : rep.rungs) {
        json jr = {{"k", r.k}, {"class", className(r.cls)}};
        if (r.cls == SeqClass::Finite) jr["limit"] = r.limit;
        jr["h_trace"] = r.h_trace;
        j["rungs"].push_back(jr);
      }
      writeAtomic(ca.out.empty() ? "-" : ca.out, j.dump(2) + "\n");
      return rep.max_order >= 0 ? kExitOk : kExitVerdict;
    }

    if (trace->parsed()) {
      const Polyline line = traceLeaf(ctx.field, {trace_p0[0], trace_p0[1]}, ctx.chart.box,
                                      trace_tmax, 1e-10, trace_ds);
      std::ostringstream os;
      os << "t,x,y\n";
      for (const auto& q : line)
        os << csvDouble(q.t) << ',' << csvDouble(q.p.x) << ',' << csvDouble(q.p.y) << '\n';
      writeAtomic(ca.out.empty() ? "-" : ca.out, os.str());
      return kExitOk;
    }

    if (posi->parsed()) {
      PositivityOptions opt;
      opt.depth = posi_depth;
      opt.flow.box = ctx.chart.box;
      opt.G = &ctx.ham.G;
      const PositivityCertificate cert(ctx.chart, opt);
      Rng rng(ca.seed);
      long covered = 0;
      double min_lie = std::numeric_limits<double>::infinity();
      for (int i = 0; i < posi_samples; ++i) {
        const auto s = cert.evaluate(rng.inBox(ctx.chart.box));
        if (!s.covered) continue;
        ++covered;
        min_lie = std::min(min_lie, s.lie);
      }
      json j;
      j["schema"] = 1;
      j["model"] = ctx.spec.name;
      j["depth"] = posi_depth;
      j["samples"] = posi_samples;
      j["covered"] = covered;
      j["min_lie"] = covered ? min_lie : 0.0;
      const bool pass = covered > 0 && min_lie > 0.0;
      j["pass"] = pass;
      writeAtomic(ca.out.empty() ? "-" : ca.out, j.dump(2) + "\n");
      return pass ? kExitOk : kExitVerdict;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
