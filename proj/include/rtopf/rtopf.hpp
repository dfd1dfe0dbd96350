#pragma once

#include "rtopf/common.hpp"
#include "rtopf/config.hpp"
#include "rtopf/dispatch.hpp"
#include "rtopf/grid.hpp"
#include "rtopf/io.hpp"
#include "rtopf/opf.hpp"
#include "rtopf/powerflow.hpp"
#include "rtopf/scenario.hpp"
#include "rtopf/scheduler.hpp"
#include "rtopf/simulator.hpp"
