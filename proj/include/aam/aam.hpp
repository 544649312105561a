#pragma once

#include "aam/adaptive.hpp"
#include "aam/baselines.hpp"
#include "aam/config.hpp"
#include "aam/impedance.hpp"
#include "aam/integrators.hpp"
#include "aam/io.hpp"
#include "aam/metrics.hpp"
#include "aam/plant.hpp"
#include "aam/rotation.hpp"
#include "aam/scenario.hpp"
#include "aam/trajectory.hpp"
#include "aam/types.hpp"
#include "aam/runner.hpp"
