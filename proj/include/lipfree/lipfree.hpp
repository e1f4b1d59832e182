#pragma once

#include "core.hpp"
#include "norm.hpp"
#include "region.hpp"
#include "set_model.hpp"
#include "geometry.hpp"
#include "enlargement.hpp"
#include "smoothing.hpp"
#include "interpolation.hpp"
#include "pipeline.hpp"
#include "io.hpp"
