#pragma once

#include "rankmargin/csv.hpp"
#include "rankmargin/diagnostics.hpp"
#include "rankmargin/draws_io.hpp"
#include "rankmargin/fit.hpp"
#include "rankmargin/hmc.hpp"
#include "rankmargin/match_data.hpp"
#include "rankmargin/mathutil.hpp"
#include "rankmargin/model.hpp"
#include "rankmargin/posterior.hpp"
#include "rankmargin/predict.hpp"
#include "rankmargin/rng.hpp"
#include "rankmargin/synth.hpp"
