#pragma once

#include "boundedness.hpp"
#include "config_io.hpp"
#include "error.hpp"
#include "flow.hpp"
#include "integrator.hpp"
#include "invariant_curve.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "periodic.hpp"
#include "phase_state.hpp"
#include "poincare.hpp"
#include "rotation.hpp"
#include "special.hpp"
#include "special_cache.hpp"
#include "trig_poly.hpp"
#include "seed_grid.hpp"
