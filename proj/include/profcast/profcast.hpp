#pragma once

#include "profcast/bma.hpp"
#include "profcast/config.hpp"
#include "profcast/csv.hpp"
#include "profcast/errors.hpp"
#include "profcast/impute.hpp"
#include "profcast/lgcm.hpp"
#include "profcast/mcmc.hpp"
#include "profcast/panel.hpp"
#include "profcast/pipeline.hpp"
#include "profcast/project.hpp"
#include "profcast/rng.hpp"
#include "profcast/score.hpp"
#include "profcast/stats.hpp"
#include "profcast/svg.hpp"
#include "profcast/unicode.hpp"
#include "profcast/version.hpp"
