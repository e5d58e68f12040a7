#pragma once

#include "canopy/csv.hpp"
#include "canopy/dynamics.hpp"
#include "canopy/equilibrium.hpp"
#include "canopy/errors.hpp"
#include "canopy/estimation.hpp"
#include "canopy/instrument.hpp"
#include "canopy/json_io.hpp"
#include "canopy/math.hpp"
#include "canopy/panel.hpp"
#include "canopy/params.hpp"
#include "canopy/prior.hpp"
#include "canopy/rng.hpp"
