#include "planarcoh/registry.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pcoh {

namespace {

struct ModelRef {
  std::string family;
  int n = 0;
};

std::optional<ModelRef> parseName(const std::string& name) {
  std::string fam;
  std::string num;
  if (const auto colon = name.find(':'); colon != std::string::npos) {
    fam = name.substr(0, colon);
    num = name.substr(colon + 1);
  } else if (const auto paren = name.find('('); paren != std::string::npos && name.back() == ')') {
    fam = name.substr(0, paren);
    num = name.substr(paren + 1, name.size() - paren - 2);
  } else {
    return std::nullopt;
  }
  if (fam != "ex51" && fam != "ex52") return std::nullopt;
  try {
    const int n = std::stoi(num);
    if (n < 1) return std::nullopt;
    return ModelRef{fam, n};
  } catch (...) {
    return std::nullopt;
  }
}

std::string itoa(int v) { return std::to_string(v); }

FieldSpec makeEx51(int n, const Box& box) {
  if (n > 5)
    throw ValidationError(
        "ex51:" + itoa(n) +
        ": for n > 5 the reference Hamiltonian 2*y*exp(x) is no longer transversal to the "
        "field everywhere; no registry entry");
  FieldSpec s;
  s.model = "ex51:" + itoa(n);
  s.name = s.model;
  s.box = box;
  s.fx = n == 1 ? "2*y" : itoa(1 - n) + "+" + itoa(1 + n) + "*y";
  s.fy = "1-y^2";
  s.F = n == 1 ? "(y^2-1)*exp(x)" : "(1+y)^" + itoa(n) + "*(1-y)*exp(x)";
  s.G = "2*y*exp(x)";
  s.separatrices = {
      {"s-", "y=-1", 0.0, {"s+"}},
      {"s+", "y=1", 0.0, {"s-"}},
  };
  s.transversals = {
      {"s-", "level-set", s.G, -2.0, {0.0, -1.0}, std::nullopt},
      {"s+", "level-set", s.G, +2.0, {0.0, +1.0}, std::nullopt},
  };
  if (n >= 2) s.degenerate = {"s-"};
  return s;
}

FieldSpec makeEx52(int n, const Box& box) {
  FieldSpec s;
  s.model = "ex52:" + itoa(n);
  s.name = s.model;
  s.box = box;
  s.fx = n == 1 ? "cos(y)" : "cos(y)+" + itoa(n - 1) + "*cos(y/2)^2";
  s.fy = "-sin(y)";
  s.F = n == 1 ? "exp(x)*sin(y)" : "-sin(y/2)^" + itoa(n - 1) + "*sin(y)*exp(x)";
  s.G = n == 1 ? "exp(x)*cos(y)" : "cos(y)*exp(x/" + itoa(n) + ")";

  const double pi = std::acos(-1.0);
  const int klo = static_cast<int>(std::ceil(box.y1 / pi - 1e-12));
  const int khi = static_cast<int>(std::floor(box.y2 / pi + 1e-12));
  if (khi < klo) throw ValidationError("ex52: the box contains no separatrix y = k*pi");
  auto sid = [&](int k) { return "s" + itoa(k); };
  for (int k = klo; k <= khi; ++k) {
    SeparatrixSpec sep;
    sep.id = sid(k);
    char buf[48];
    std::snprintf(buf, sizeof buf, "y=%.17g", k * pi);
    sep.desc = buf;
    sep.F_level = 0.0;
    if (k - 1 >= klo) sep.inseparable_from.push_back(sid(k - 1));
    if (k + 1 <= khi) sep.inseparable_from.push_back(sid(k + 1));
    s.separatrices.push_back(std::move(sep));

    TransversalSpec t;
    t.separatrix = sid(k);
    t.kind = "level-set";
    t.expr = s.G;
    t.level = (k % 2 == 0) ? 1.0 : -1.0;
    t.anchor = {0.0, k * pi};
    // Guard selects the component of the level set inside this cosine strip.
    t.guard = Box{-1e9, 1e9, k * pi - pi / 2, k * pi + pi / 2};
    s.transversals.push_back(std::move(t));

    if (n >= 2 && k % 2 == 0) s.degenerate.push_back(sid(k));
  }
  return s;
}

}  // namespace

bool isRegistryName(const std::string& name) { return parseName(name).has_value(); }

FieldSpec registryModel(const std::string& name, std::optional<Box> box) {
  const auto ref = parseName(name);
  if (!ref) throw ValidationError("unknown registry model '" + name + "'");
  const Box b = box.value_or(Box{});
  return ref->family == "ex51" ? makeEx51(ref->n, b) : makeEx52(ref->n, b);
}

}  // namespace pcoh
