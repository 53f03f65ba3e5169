#pragma once

#include "pmnn/harness/config.hpp"
#include "pmnn/harness/density.hpp"
#include "pmnn/harness/registry.hpp"
#include "pmnn/harness/run.hpp"
