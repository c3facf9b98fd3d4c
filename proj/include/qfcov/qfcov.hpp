#pragma once

#include "qfcov/chi2.hpp"
#include "qfcov/dataset.hpp"
#include "qfcov/density.hpp"
#include "qfcov/errors.hpp"
#include "qfcov/estimators.hpp"
#include "qfcov/fourth_moment.hpp"
#include "qfcov/grid.hpp"
#include "qfcov/io.hpp"
#include "qfcov/parallel.hpp"
#include "qfcov/permutation.hpp"
#include "qfcov/report.hpp"
#include "qfcov/rng.hpp"
#include "qfcov/simulation.hpp"
#include "qfcov/surfaces.hpp"
#include "qfcov/ws.hpp"
