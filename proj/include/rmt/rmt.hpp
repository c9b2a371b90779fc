#pragma once

#include "rmt/anticoncentration.hpp"
#include "rmt/ball_cover.hpp"
#include "rmt/core.hpp"
#include "rmt/counting.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/experiments.hpp"
#include "rmt/lcd.hpp"
#include "rmt/linalg.hpp"
#include "rmt/random.hpp"
#include "rmt/rational.hpp"
#include "rmt/report.hpp"
#include "rmt/stats.hpp"
