#pragma once

#include "hybridsim/analysis.hpp"
#include "hybridsim/control.hpp"
#include "hybridsim/datamodel.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/placement.hpp"
#include "hybridsim/report.hpp"
#include "hybridsim/run.hpp"
#include "hybridsim/topology.hpp"
#include "hybridsim/workload.hpp"
