#pragma once

#include "qmaxwell/errors.hpp"
#include "qmaxwell/grid.hpp"
#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/frechet.hpp"
#include "qmaxwell/solver.hpp"
#include "qmaxwell/moment_matcher.hpp"
#include "qmaxwell/theorem_lab.hpp"
#include "qmaxwell/config.hpp"
#include "qmaxwell/report.hpp"
#include "qmaxwell/cli.hpp"
