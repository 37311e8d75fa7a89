#pragma once

// Umbrella header for the whole library.

#include "ewt/analysis.hpp"
#include "ewt/analytic.hpp"
#include "ewt/config.hpp"
#include "ewt/demons.hpp"
#include "ewt/error.hpp"
#include "ewt/fft.hpp"
#include "ewt/grid.hpp"
#include "ewt/io.hpp"
#include "ewt/kernels.hpp"
#include "ewt/parallel.hpp"
#include "ewt/partition.hpp"
#include "ewt/pipeline.hpp"
#include "ewt/raster.hpp"
#include "ewt/segmentation.hpp"
#include "ewt/transform.hpp"
