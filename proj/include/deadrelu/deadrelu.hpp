#pragma once

#include "deadrelu/bounds.hpp"
#include "deadrelu/config.hpp"
#include "deadrelu/data_model.hpp"
#include "deadrelu/experiments.hpp"
#include "deadrelu/gradient.hpp"
#include "deadrelu/inactivity.hpp"
#include "deadrelu/network.hpp"
#include "deadrelu/parallel.hpp"
#include "deadrelu/rng.hpp"
#include "deadrelu/sgd.hpp"
#include "deadrelu/verify.hpp"
