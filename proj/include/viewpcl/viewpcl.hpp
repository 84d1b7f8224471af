#pragma once

#include "viewpcl/errors.hpp"
#include "viewpcl/geometry.hpp"
#include "viewpcl/probability.hpp"
#include "viewpcl/scenebundle.hpp"
#include "viewpcl/scoring.hpp"
#include "viewpcl/selection.hpp"
#include "viewpcl/synth.hpp"
#include "viewpcl/transport.hpp"
