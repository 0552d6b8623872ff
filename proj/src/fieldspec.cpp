#include "planarcoh/fieldspec.hpp"

#include "planarcoh/registry.hpp"

namespace pcoh {

using nlohmann::json;

namespace {

json boxToJson(const Box& b) { return json::array({b.x1, b.x2, b.y1, b.y2}); }

Box boxFromJson(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError("box must be [x1, x2, y1, y2]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

FieldSpec specFromJson(const json& j) {
  FieldSpec s;
  if (j.contains("schema")) s.schema = j["schema"].get<int>();
  if (s.schema != 1) throw ValidationError("unsupported spec schema " + std::to_string(s.schema));
  if (j.contains("box")) s.box = boxFromJson(j["box"]);
  if (j.contains("model")) {
    s.model = j["model"].get<std::string>();
    return s;
  }
  const auto& f = j.at("field");
  s.fx = f.at("fx").get<std::string>();
  s.fy = f.at("fy").get<std::string>();
  if (f.contains("name")) s.name = f["name"].get<std::string>();
  const auto& h = j.at("hamiltonian");
  s.F = h.at("F").get<std::string>();
  s.G = h.at("G").get<std::string>();
  for (const auto& js : j.at("separatrices")) {
    SeparatrixSpec sep;
    sep.id = js.at("id").get<std::string>();
    sep.desc = js.at("desc").get<std::string>();
    sep.F_level = js.value("F_level", 0.0);
    if (js.contains("inseparable_from"))
      for (const auto& o : js["inseparable_from"]) sep.inseparable_from.push_back(o.get<std::string>());
    s.separatrices.push_back(std::move(sep));
  }
  for (const auto& jt : j.at("transversals")) {
    TransversalSpec t;
    t.separatrix = jt.at("separatrix").get<std::string>();
    t.kind = jt.value("kind", std::string("level-set"));
    t.expr = jt.value("expr", std::string());
    t.level = jt.value("level", 0.0);
    if (jt.contains("anchor")) {
      t.anchor.x = jt["anchor"][0].get<double>();
      t.anchor.y = jt["anchor"][1].get<double>();
    }
    if (jt.contains("guard")) t.guard = boxFromJson(jt["guard"]);
    s.transversals.push_back(std::move(t));
  }
  if (j.contains("degenerate"))
    for (const auto& d : j["degenerate"]) s.degenerate.push_back(d.get<std::string>());
  return s;
}

json specToJson(const FieldSpec& s) {
  json j;
  j["schema"] = s.schema;
  j["box"] = boxToJson(s.box);
  if (!s.model.empty() && s.fx.empty()) {
    j["model"] = s.model;
    return j;
  }
  if (!s.model.empty()) j["model_origin"] = s.model;
  j["field"] = {{"fx", s.fx}, {"fy", s.fy}, {"name", s.name}};
  j["hamiltonian"] = {{"F", s.F}, {"G", s.G}};
  j["separatrices"] = json::array();
  for (const auto& sep : s.separatrices) {
    json js = {{"id", sep.id}, {"desc", sep.desc}, {"F_level", sep.F_level}};
    js["inseparable_from"] = sep.inseparable_from;
    j["separatrices"].push_back(js);
  }
  j["transversals"] = json::array();
  for (const auto& t : s.transversals) {
    json jt = {{"separatrix", t.separatrix},
               {"kind", t.kind},
               {"expr", t.expr},
               {"level", t.level},
               {"anchor", json::array({t.anchor.x, t.anchor.y})}};
    if (t.guard) jt["guard"] = boxToJson(*t.guard);
    j["transversals"].push_back(jt);
  }
  j["degenerate"] = s.degenerate;
  return j;
}

FieldSpec resolveSpec(FieldSpec s) {
  if (s.model.empty() || !s.fx.empty()) return s;
  return registryModel(s.model, s.box);
}

ModelContext buildContext(FieldSpec spec_in, std::uint64_t seed) {
  FieldSpec spec = resolveSpec(std::move(spec_in));
  if (spec.fx.empty() || spec.fy.empty())
    throw ValidationError("spec needs either a registry model or explicit field components");

  ModelContext ctx{spec, {}, {}, {}, {}};
  try {
    ctx.field = PlanarField::parse(spec.fx, spec.fy, spec.name);
    ctx.ham.F = Expr::parse(spec.F);
    ctx.ham.G = Expr::parse(spec.G);
  } catch (const ParseError& e) {
    throw ValidationError(std::string("expression error: ") + e.what());
  }
  ctx.ham.degenerate_ids = spec.degenerate;

  std::vector<Separatrix> seps;
  for (const auto& ss : spec.separatrices) {
    Separatrix s;
    s.id = ss.id;
    s.desc = SeparatrixDesc::parse(ss.desc);
    s.F_level = ss.F_level;
    s.inseparable_from = ss.inseparable_from;
    seps.push_back(std::move(s));
  }
  CST cst;
  for (const auto& ts : spec.transversals) {
    Transversal t;
    if (ts.kind == "vertical-segment") {
      t = Transversal::verticalSegment(ts.level, ts.anchor);
    } else if (ts.kind == "horizontal-segment") {
      t = Transversal::horizontalSegment(ts.level, ts.anchor);
    } else if (ts.kind == "level-set") {
      Expr e;
      try {
        e = Expr::parse(ts.expr);
      } catch (const ParseError& pe) {
        throw ValidationError("transversal for '" + ts.separatrix + "': " + pe.what());
      }
      t = Transversal::levelSet(std::move(e), ts.level, ts.anchor, ts.guard);
    } else {
      throw ValidationError("unknown transversal kind '" + ts.kind + "'");
    }
    cst.emplace(ts.separatrix, std::move(t));
  }

  ctx.chart = buildChart(ctx.field, std::move(seps), std::move(cst), spec.box);

  // Tag transversals whose defining function drifts monotonically along the
  // field; crossing searches can then discard hopeless directions outright.
  for (auto& [id, t] : ctx.chart.cst) {
    const Expr lie = ctx.field.lieDerivative(t.defining);
    int pos = 0, neg = 0, valid = 0;
    for (int i = 0; i < 17; ++i) {
      for (int j = 0; j < 17; ++j) {
        const double x = spec.box.x1 + spec.box.width() * i / 16.0;
        const double y = spec.box.y1 + spec.box.height() * j / 16.0;
        const EvalResult r = lie.eval(x, y);
        if (!r.ok() || r.value == 0.0) continue;
        ++valid;
        (r.value > 0 ? pos : neg) += 1;
      }
    }
    if (valid >= 64 && neg == 0) t.flow_monotone = +1;
    else if (valid >= 64 && pos == 0) t.flow_monotone = -1;
  }

  Rng rng(seed);
  const auto collar = degeneracyCollar(ctx.chart.seps, ctx.ham);
  ctx.dp = derivePair(ctx.field, ctx.ham, spec.box, rng, 200, collar);

  // Separatrices must sit on the declared F-levels, and the G-images of each
  // adjacent pair must be disjoint.
  for (const auto& s : ctx.chart.seps) {
    if (s.desc.kind == SeparatrixDesc::Kind::Seed) continue;
    for (double u : {0.25, 0.5, 0.75}) {
      const Point2 p = s.desc.kind == SeparatrixDesc::Kind::LineY
                           ? Point2{spec.box.x1 + u * spec.box.width(), s.desc.value}
                           : Point2{s.desc.value, spec.box.y1 + u * spec.box.height()};
      const EvalResult F = ctx.ham.F.eval(p);
      if (F.ok() && std::fabs(F.value - s.F_level) > 1e-9 * std::max(1.0, std::fabs(F.value)))
        throw ValidationError("separatrix '" + s.id + "' is not on its declared F-level");
    }
  }
  for (const auto& pair : ctx.chart.pairs) {
    const double g1 = ctx.dp.G(pair.p1), g2 = ctx.dp.G(pair.p2);
    if (!(std::isfinite(g1) && std::isfinite(g2)) || g1 == g2)
      throw ValidationError("pair " + pair.id + ": transversal junctions share a G-value");
  }
  return ctx;
}

}  // namespace pcoh
