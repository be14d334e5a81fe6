#pragma once

#include "eflow/error.hpp"
#include "eflow/linalg.hpp"
#include "eflow/dopri5.hpp"
#include "eflow/flow.hpp"
#include "eflow/frak.hpp"
#include "eflow/evolution.hpp"
#include "eflow/invariants.hpp"
#include "eflow/asymptotics.hpp"
#include "eflow/fock.hpp"
#include "eflow/scenarios.hpp"
#include "eflow/io.hpp"
