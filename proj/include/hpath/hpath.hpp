#pragma once

// Umbrella header.

#include "hpath/common.hpp"
#include "hpath/rng.hpp"
#include "hpath/stats.hpp"
#include "hpath/parallel.hpp"
#include "hpath/geometry.hpp"
#include "hpath/timegrid.hpp"
#include "hpath/sde.hpp"
#include "hpath/cylinder.hpp"
#include "hpath/malliavin.hpp"
#include "hpath/functional.hpp"
#include "hpath/distance.hpp"
#include "hpath/concentration.hpp"
#include "hpath/harness.hpp"
