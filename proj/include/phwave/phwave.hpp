#pragma once

#include "phwave/linalg.hpp"
#include "phwave/subsystem.hpp"
#include "phwave/discrete_gradient.hpp"
#include "phwave/integrator.hpp"
#include "phwave/scattering.hpp"
#include "phwave/coupling.hpp"
#include "phwave/certify.hpp"
#include "phwave/bench/config.hpp"
#include "phwave/bench/benchmark.hpp"
#include "phwave/bench/trajectory.hpp"
#include "phwave/bench/csv.hpp"
#include "phwave/bench/sweep.hpp"
