#pragma once

#include "tomo/cv.hpp"
#include "tomo/entanglement.hpp"
#include "tomo/io.hpp"
#include "tomo/operators.hpp"
#include "tomo/pom.hpp"
#include "tomo/process_est.hpp"
#include "tomo/rng.hpp"
#include "tomo/sim.hpp"
#include "tomo/state_est.hpp"
