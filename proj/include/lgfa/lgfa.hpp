#pragma once

#include "lgfa/baselines.hpp"
#include "lgfa/bench.hpp"
#include "lgfa/completion.hpp"
#include "lgfa/config.hpp"
#include "lgfa/error.hpp"
#include "lgfa/foreground.hpp"
#include "lgfa/fusion.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/io.hpp"
#include "lgfa/localization.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/metrics.hpp"
#include "lgfa/pose.hpp"
#include "lgfa/report.hpp"
#include "lgfa/rng.hpp"
#include "lgfa/scenario.hpp"
