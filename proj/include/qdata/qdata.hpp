#pragma once

#include "qdata/config.hpp"
#include "qdata/control.hpp"
#include "qdata/detector.hpp"
#include "qdata/flow_table.hpp"
#include "qdata/match_schemes.hpp"
#include "qdata/qlearning.hpp"
#include "qdata/rng.hpp"
#include "qdata/scenario.hpp"
#include "qdata/svm.hpp"
#include "qdata/traffic.hpp"
#include "qdata/training.hpp"
