#pragma once

#include "surftv/atv.hpp"
#include "surftv/core.hpp"
#include "surftv/labels.hpp"
#include "surftv/ltv.hpp"
#include "surftv/mesh.hpp"
#include "surftv/mesh_io.hpp"
#include "surftv/metrics.hpp"
#include "surftv/simplex.hpp"
#include "surftv/simplex_qp.hpp"
#include "surftv/sphere.hpp"
#include "surftv/sweep.hpp"
