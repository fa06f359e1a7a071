#pragma once

#include "adavar/config.hpp"
#include "adavar/domain.hpp"
#include "adavar/estimation.hpp"
#include "adavar/experiments.hpp"
#include "adavar/io.hpp"
#include "adavar/objective.hpp"
#include "adavar/sampler.hpp"
#include "adavar/schedule.hpp"
#include "adavar/solver.hpp"
