#pragma once

#include "pvnowcast/config.hpp"
#include "pvnowcast/csv.hpp"
#include "pvnowcast/digest.hpp"
#include "pvnowcast/error.hpp"
#include "pvnowcast/harmonics.hpp"
#include "pvnowcast/measurement.hpp"
#include "pvnowcast/metrics.hpp"
#include "pvnowcast/model.hpp"
#include "pvnowcast/parallel.hpp"
#include "pvnowcast/pipeline.hpp"
#include "pvnowcast/random.hpp"
#include "pvnowcast/scenario.hpp"
#include "pvnowcast/simulator.hpp"
