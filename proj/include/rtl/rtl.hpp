#pragma once

#include "rtl/baselines.hpp"
#include "rtl/core.hpp"
#include "rtl/csv_io.hpp"
#include "rtl/features.hpp"
#include "rtl/metrics.hpp"
#include "rtl/model_io.hpp"
#include "rtl/normalization.hpp"
#include "rtl/pipeline.hpp"
#include "rtl/recurrent.hpp"
#include "rtl/run_config.hpp"
#include "rtl/supervised.hpp"
#include "rtl/synth.hpp"
#include "rtl/timeseries.hpp"
#include "rtl/transform.hpp"
#include "rtl/tuning.hpp"
