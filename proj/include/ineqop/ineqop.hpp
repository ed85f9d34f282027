#pragma once

// Umbrella header: inequality-of-opportunity estimation with machine-learning
// first stages, debiased Gini/MLD estimators, partial effects and tests.

#include "ineqop/common.hpp"
#include "ineqop/csv.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/design.hpp"
#include "ineqop/folds.hpp"
#include "ineqop/linear.hpp"
#include "ineqop/tree.hpp"
#include "ineqop/learners.hpp"
#include "ineqop/crossfit.hpp"
#include "ineqop/inequality.hpp"
#include "ineqop/iop.hpp"
#include "ineqop/pipeline.hpp"
#include "ineqop/effects.hpp"
#include "ineqop/sim.hpp"
#include "ineqop/io.hpp"
