#pragma once

#include "detkit/bases.hpp"
#include "detkit/errors.hpp"
#include "detkit/hash.hpp"
#include "detkit/init_plan.hpp"
#include "detkit/layers.hpp"
#include "detkit/metrics.hpp"
#include "detkit/ordering.hpp"
#include "detkit/parallel.hpp"
#include "detkit/rng.hpp"
#include "detkit/tensor.hpp"
#include "detkit/theory.hpp"
#include "detkit/train.hpp"
#include "detkit/verify.hpp"
