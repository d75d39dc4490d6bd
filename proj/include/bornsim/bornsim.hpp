#pragma once

#include <bornsim/analytic.hpp>
#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/numeric.hpp>
#include <bornsim/oracle.hpp>
#include <bornsim/quadrature.hpp>
#include <bornsim/rng.hpp>
#include <bornsim/sampler.hpp>
#include <bornsim/trajectory.hpp>
