#pragma once

#include "renormtrace/core.hpp"
#include "renormtrace/symbol.hpp"
#include "renormtrace/specops.hpp"
#include "renormtrace/renorm.hpp"
#include "renormtrace/traces.hpp"
#include "renormtrace/jlo.hpp"
#include "renormtrace/detbundle.hpp"
#include "renormtrace/acsalg.hpp"
#include "renormtrace/scenario.hpp"
#include "renormtrace/tasks.hpp"
