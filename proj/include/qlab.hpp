#pragma once

#include "qlab/core.hpp"
#include "qlab/dfio.hpp"
#include "qlab/functions.hpp"
#include "qlab/harness.hpp"
#include "qlab/lorentz.hpp"
#include "qlab/quadrature.hpp"
#include "qlab/quotient.hpp"
#include "qlab/ratefit.hpp"
