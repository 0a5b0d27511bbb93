#pragma once

#include "ehmi/acquisition.hpp"
#include "ehmi/analysis.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/json_io.hpp"
#include "ehmi/objectives.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/session.hpp"
#include "ehmi/simulation.hpp"
#include "ehmi/sobol.hpp"
#include "ehmi/surrogate.hpp"
#include "ehmi/synthetic_user.hpp"
