#pragma once

#include "core.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "ifs.hpp"
#include "invariant.hpp"
#include "io.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "mra.hpp"
#include "pathspace.hpp"
#include "rng.hpp"
#include "transfer.hpp"
#include "uhilbert.hpp"
