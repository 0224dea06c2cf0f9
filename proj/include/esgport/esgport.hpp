#pragma once

#include "esgport/csv.hpp"
#include "esgport/date.hpp"
#include "esgport/error.hpp"
#include "esgport/experiment.hpp"
#include "esgport/forecast.hpp"
#include "esgport/market_data.hpp"
#include "esgport/metrics.hpp"
#include "esgport/optimizer.hpp"
#include "esgport/parallel.hpp"
#include "esgport/random.hpp"
#include "esgport/report.hpp"
