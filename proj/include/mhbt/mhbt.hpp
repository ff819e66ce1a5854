#pragma once

#include "mhbt/batch.hpp"
#include "mhbt/dataset.hpp"
#include "mhbt/diagnostics.hpp"
#include "mhbt/error.hpp"
#include "mhbt/model.hpp"
#include "mhbt/numeric.hpp"
#include "mhbt/oracle.hpp"
#include "mhbt/proposals.hpp"
#include "mhbt/rng.hpp"
#include "mhbt/sampler.hpp"
