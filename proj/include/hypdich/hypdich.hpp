#pragma once

#include "hypdich/expr.hpp"
#include "hypdich/grid.hpp"
#include "hypdich/problem.hpp"
#include "hypdich/coefficients.hpp"
#include "hypdich/characteristics.hpp"
#include "hypdich/linear_solver.hpp"
#include "hypdich/dichotomy.hpp"
#include "hypdich/quasilinear.hpp"
#include "hypdich/example21.hpp"
#include "hypdich/io.hpp"
