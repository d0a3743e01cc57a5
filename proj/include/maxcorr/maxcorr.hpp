#pragma once

#include "maxcorr/csv.hpp"
#include "maxcorr/gaussian.hpp"
#include "maxcorr/oracle.hpp"
#include "maxcorr/risk.hpp"
#include "maxcorr/transport.hpp"
#include "maxcorr/types.hpp"
