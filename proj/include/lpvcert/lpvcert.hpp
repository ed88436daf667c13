#pragma once

// Umbrella header for the lpvcert library.

#include "lpvcert/complex_matrix.hpp"
#include "lpvcert/cover.hpp"
#include "lpvcert/delay.hpp"
#include "lpvcert/delay_analysis.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"
#include "lpvcert/pbh.hpp"
#include "lpvcert/robustness.hpp"
#include "lpvcert/system_model.hpp"
