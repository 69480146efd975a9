#pragma once

// Library umbrella header. The command-line front end lives in pcbound/cli.hpp.

#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/fairness.hpp"
#include "pcbound/io.hpp"
#include "pcbound/model.hpp"
#include "pcbound/oracle.hpp"
#include "pcbound/parallel.hpp"
#include "pcbound/program.hpp"
#include "pcbound/random.hpp"
#include "pcbound/response.hpp"
#include "pcbound/simplex.hpp"
#include "pcbound/solver.hpp"
