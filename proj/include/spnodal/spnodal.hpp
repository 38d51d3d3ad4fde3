#pragma once

#include "spnodal/errors.hpp"
#include "spnodal/grid.hpp"
#include "spnodal/linear_solver.hpp"
#include "spnodal/nodal_domains.hpp"
#include "spnodal/poisson.hpp"
#include "spnodal/nonlinearity.hpp"
#include "spnodal/energy.hpp"
#include "spnodal/nehari.hpp"
#include "spnodal/minimizer.hpp"
#include "spnodal/verify.hpp"
#include "spnodal/io.hpp"
