#pragma once

#include "amap/bench.hpp"
#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/imgio.hpp"
#include "amap/instanceseg.hpp"
#include "amap/morphometry.hpp"
#include "amap/pipeline.hpp"
#include "amap/report.hpp"
#include "amap/roidetect.hpp"
#include "amap/segprovider.hpp"
#include "amap/stats.hpp"
#include "amap/synthfix.hpp"
#include "amap/tiling.hpp"
#include "amap/types.hpp"
