#pragma once

#include "mmr/attacks.hpp"
#include "mmr/benchmarks.hpp"
#include "mmr/checkpoint.hpp"
#include "mmr/data.hpp"
#include "mmr/dataset_io.hpp"
#include "mmr/errors.hpp"
#include "mmr/experiment.hpp"
#include "mmr/geometry.hpp"
#include "mmr/metrics.hpp"
#include "mmr/models.hpp"
#include "mmr/numerics.hpp"
#include "mmr/random.hpp"
#include "mmr/strategies.hpp"
#include "mmr/synthetic.hpp"
#include "mmr/theory.hpp"
