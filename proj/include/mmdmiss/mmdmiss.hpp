#pragma once

#include "mmdmiss/error.hpp"
#include "mmdmiss/data.hpp"
#include "mmdmiss/kernel.hpp"
#include "mmdmiss/model.hpp"
#include "mmdmiss/estimator.hpp"
#include "mmdmiss/baselines.hpp"
#include "mmdmiss/mechanisms.hpp"
#include "mmdmiss/experiments.hpp"
#include "mmdmiss/config.hpp"
#include "mmdmiss/bounds.hpp"
