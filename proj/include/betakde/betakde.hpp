#pragma once

#include "densities.hpp"
#include "estimator.hpp"
#include "harness.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "risk.hpp"
#include "specfun.hpp"
