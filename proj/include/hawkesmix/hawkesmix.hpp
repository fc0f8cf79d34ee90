#pragma once

#include "hawkesmix/branching.hpp"
#include "hawkesmix/error.hpp"
#include "hawkesmix/io.hpp"
#include "hawkesmix/kernel.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/simulate.hpp"
#include "hawkesmix/spectrum.hpp"
#include "hawkesmix/stats.hpp"
#include "hawkesmix/test_function.hpp"
