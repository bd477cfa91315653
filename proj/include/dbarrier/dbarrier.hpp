#pragma once

#include "dbarrier/analytic_pricer.hpp"
#include "dbarrier/core_model.hpp"
#include "dbarrier/corridor_approx.hpp"
#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"
#include "dbarrier/mc_oracle.hpp"
#include "dbarrier/quadrature.hpp"
#include "dbarrier/structure_floor.hpp"
