#pragma once

#include "msdi/error.hpp"
#include "msdi/linalg.hpp"
#include "msdi/rng.hpp"
#include "msdi/plq.hpp"
#include "msdi/operator.hpp"
#include "msdi/operator_ops.hpp"
#include "msdi/gap.hpp"
#include "msdi/subspace.hpp"
#include "msdi/noise.hpp"
#include "msdi/integrator.hpp"
#include "msdi/diagnostics.hpp"
#include "msdi/harness.hpp"
#include "msdi/scenario.hpp"
#include "msdi/runner.hpp"
#include "msdi/cli.hpp"
