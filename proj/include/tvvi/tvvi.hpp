#pragma once

#include "tvvi/bingham/experiment.hpp"
#include "tvvi/bingham/grid.hpp"
#include "tvvi/control/minnorm.hpp"
#include "tvvi/control/tr.hpp"
#include "tvvi/core/exceptions.hpp"
#include "tvvi/core/problem.hpp"
#include "tvvi/core/solution.hpp"
#include "tvvi/io/csv.hpp"
#include "tvvi/io/format.hpp"
#include "tvvi/io/manifest.hpp"
#include "tvvi/io/matrix_market.hpp"
#include "tvvi/io/problem_io.hpp"
#include "tvvi/sensitivity/adjoint.hpp"
#include "tvvi/sensitivity/derivative.hpp"
#include "tvvi/sensitivity/generators.hpp"
#include "tvvi/sensitivity/saddle.hpp"
#include "tvvi/sensitivity/slack.hpp"
#include "tvvi/solvers/oracle.hpp"
#include "tvvi/solvers/pdhg.hpp"
#include "tvvi/solvers/ssn.hpp"
#include "tvvi/stationarity/stationarity.hpp"
#include "tvvi/util/linalg.hpp"
#include "tvvi/version.hpp"
