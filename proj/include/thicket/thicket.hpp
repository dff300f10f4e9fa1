#pragma once

// Umbrella header for the thicket library: Markov slat fields,
// closed-form transit probabilities, the quantized-steering Monte Carlo,
// image-based time-to-transit estimation, and the closed-loop flight
// simulators.

#include "thicket/analytic.hpp"
#include "thicket/camera.hpp"
#include "thicket/control.hpp"
#include "thicket/dubins.hpp"
#include "thicket/field.hpp"
#include "thicket/io.hpp"
#include "thicket/rng.hpp"
#include "thicket/sim.hpp"
#include "thicket/types.hpp"
