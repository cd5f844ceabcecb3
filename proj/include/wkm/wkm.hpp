#pragma once

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/experiments.hpp"
#include "wkm/metric.hpp"
#include "wkm/quadrature.hpp"
#include "wkm/rng.hpp"
#include "wkm/special.hpp"
#include "wkm/theory.hpp"
#include "wkm/validation.hpp"
