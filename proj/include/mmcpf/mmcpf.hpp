#pragma once

#include "checks.hpp"
#include "config.hpp"
#include "energy.hpp"
#include "grid.hpp"
#include "noise.hpp"
#include "output.hpp"
#include "params.hpp"
#include "runtime.hpp"
#include "solver.hpp"
#include "stepper.hpp"
#include "summation.hpp"
#include "version.hpp"
