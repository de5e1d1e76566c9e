#pragma once

// Umbrella header.

#include "dexpl/attribution.hpp"
#include "dexpl/dataset.hpp"
#include "dexpl/deep.hpp"
#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"
#include "dexpl/link.hpp"
#include "dexpl/model.hpp"
#include "dexpl/model_io.hpp"
#include "dexpl/report.hpp"
#include "dexpl/rootfind.hpp"
