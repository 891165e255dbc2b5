#pragma once

#include "switchctl/adjoint.hpp"
#include "switchctl/frequencies.hpp"
#include "switchctl/functional.hpp"
#include "switchctl/grid.hpp"
#include "switchctl/io.hpp"
#include "switchctl/linalg.hpp"
#include "switchctl/matrix.hpp"
#include "switchctl/minimize.hpp"
#include "switchctl/models.hpp"
#include "switchctl/pipeline.hpp"
#include "switchctl/rng.hpp"
#include "switchctl/simulate.hpp"
#include "switchctl/switching.hpp"
#include "switchctl/system.hpp"
