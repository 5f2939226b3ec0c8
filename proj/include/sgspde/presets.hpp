#pragma once

#include <string>
#include <vector>

#include "sgspde/hypreduce.hpp"

namespace sgspde::presets {

// <x>^2 <xi>^2 as a separable symbol.
Symbol sg_weight_squared();

// D_t^2 - <x>^2 <D>^2, roots +-<x><xi>.
HyperbolicOperator sg_wave();
// (D_t^2 - <x>^2 <D>^2)^2, two double roots.
HyperbolicOperator sg_wave_squared();
// (D_t + t D_x1 + D_x2)(D_t - (t - 2 x2) D_x1) in d = 2, labelled involutive.
HyperbolicOperator involutive_demo();
// D_t - speed . D, m = 1.
HyperbolicOperator transport(const Point& speed);
// D_t^2 - |D|^2, factored with roots +-<xi>.
HyperbolicOperator flat_wave();

std::vector<std::string> names();

}  // namespace sgspde::presets
