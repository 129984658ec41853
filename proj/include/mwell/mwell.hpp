#pragma once

#include "mwell/analytic.hpp"
#include "mwell/bohmian.hpp"
#include "mwell/complex_erf.hpp"
#include "mwell/errors.hpp"
#include "mwell/evolution.hpp"
#include "mwell/model.hpp"
#include "mwell/observables.hpp"
#include "mwell/ode.hpp"
#include "mwell/protocol.hpp"
#include "mwell/spectral.hpp"
#include "mwell/synthesis.hpp"
