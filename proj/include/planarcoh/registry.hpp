#pragma once

#include <optional>
#include <string>

#include "planarcoh/fieldspec.hpp"

namespace pcoh {

/// Built-in model families. Names: "ex51:n" / "ex51(n)" and "ex52:n".
///
/// ex51:n is the polynomial family (1-n+(1+n)y, 1-y^2) with the two horizontal
/// separatrices y = +1 and y = -1; kernel generator (y^2-1)e^x for n = 1,
/// (1+y)^n (1-y) e^x otherwise; transversal Hamiltonian 2 y e^x. n is capped
/// at 5: beyond that the level sets of the Hamiltonian stop being transversal
/// to the field on interior curves.
///
/// ex52:n is the periodic family (cos y + (n-1)cos^2(y/2), -sin y) with
/// separatrices y = k*pi inside the box; kernel generator e^x sin y for n = 1;
/// transversal Hamiltonian cos y e^{x/n}. The separatrix count is bounded by
/// the working box (only those inside it are actionable).
FieldSpec registryModel(const std::string& name, std::optional<Box> box = std::nullopt);

bool isRegistryName(const std::string& name);

}  // namespace pcoh
