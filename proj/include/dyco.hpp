#pragma once

#include "dyco/aggregation.hpp"
#include "dyco/core.hpp"
#include "dyco/curation.hpp"
#include "dyco/errors.hpp"
#include "dyco/evaluation.hpp"
#include "dyco/hashing.hpp"
#include "dyco/metrics.hpp"
#include "dyco/numeric.hpp"
#include "dyco/parallel.hpp"
#include "dyco/pick.hpp"
#include "dyco/records.hpp"
#include "dyco/rng.hpp"
#include "dyco/scorers.hpp"
#include "dyco/synth.hpp"
#include "dyco/training.hpp"
