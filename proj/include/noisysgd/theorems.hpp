#pragma once

#include "noisysgd/theorems/ap_poly.hpp"
#include "noisysgd/theorems/digits.hpp"
#include "noisysgd/theorems/report.hpp"
#include "noisysgd/theorems/theorem1.hpp"
#include "noisysgd/theorems/theorem2.hpp"
#include "noisysgd/theorems/theorem34.hpp"
