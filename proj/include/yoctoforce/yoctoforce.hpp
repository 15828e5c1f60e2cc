#pragma once

// Umbrella header: the full quantum-limited force-sensing toolkit.

#include "yoctoforce/analysis.hpp"
#include "yoctoforce/config.hpp"
#include "yoctoforce/constants.hpp"
#include "yoctoforce/csv.hpp"
#include "yoctoforce/fit.hpp"
#include "yoctoforce/linalg.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/report.hpp"
#include "yoctoforce/rng.hpp"
#include "yoctoforce/runner.hpp"
#include "yoctoforce/stats.hpp"
#include "yoctoforce/svg.hpp"
#include "yoctoforce/synth.hpp"
#include "yoctoforce/types.hpp"
#include "yoctoforce/validate.hpp"
