// Umbrella header.
#pragma once

#include "hfd/combinatorics.hpp"
#include "hfd/config.hpp"
#include "hfd/ensemble.hpp"
#include "hfd/hfd_general.hpp"
#include "hfd/hfd_ou.hpp"
#include "hfd/linalg.hpp"
#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/oracles/exact_three_level.hpp"
#include "hfd/oracles/hops.hpp"
#include "hfd/oracles/lindblad.hpp"
#include "hfd/oracles/sde.hpp"
#include "hfd/runner.hpp"
#include "hfd/single_path.hpp"
#include "hfd/trajectory.hpp"
#include "hfd/types.hpp"
#include "hfd/version.hpp"
