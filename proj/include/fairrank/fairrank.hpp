#pragma once

#include "bvn.hpp"
#include "core.hpp"
#include "eval.hpp"
#include "felix.hpp"
#include "io.hpp"
#include "lp.hpp"
#include "matching.hpp"
#include "random.hpp"
#include "sim.hpp"
#include "simplex.hpp"
