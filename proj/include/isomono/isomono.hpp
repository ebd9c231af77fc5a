#pragma once

// Numeric core. The JSON/CSV layer (io.hpp, cli.hpp) is separate because it
// needs nlohmann_json.

#include "isomono/core.hpp"
#include "isomono/laurent.hpp"
#include "isomono/ratfun.hpp"
#include "isomono/pfsum.hpp"
#include "isomono/connection.hpp"
#include "isomono/twist.hpp"
#include "isomono/symplectic.hpp"
#include "isomono/ode.hpp"
#include "isomono/monodromy.hpp"
#include "isomono/isoflow.hpp"
