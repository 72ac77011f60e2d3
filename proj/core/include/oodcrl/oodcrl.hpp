#pragma once

#include "oodcrl/error.hpp"
#include "oodcrl/io.hpp"
#include "oodcrl/metrics.hpp"
#include "oodcrl/scoring.hpp"
#include "oodcrl/synth.hpp"
#include "oodcrl/types.hpp"
