#pragma once

#include "balance/error.hpp"
#include "balance/harness/box.hpp"
#include "balance/harness/candidate_pool.hpp"
#include "balance/harness/gradcheck.hpp"
#include "balance/harness/toy_longtail.hpp"
#include "balance/harness/toy_regression.hpp"
#include "balance/losses.hpp"
#include "balance/pyramid.hpp"
#include "balance/reweight.hpp"
#include "balance/rng.hpp"
#include "balance/sampling.hpp"
#include "balance/tensor.hpp"
