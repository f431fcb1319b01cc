#pragma once

#include "stereonav/config.hpp"
#include "stereonav/epipolar.hpp"
#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/image.hpp"
#include "stereonav/keyvalue.hpp"
#include "stereonav/mapping.hpp"
#include "stereonav/obstacle.hpp"
#include "stereonav/pnm.hpp"
#include "stereonav/pointcloud.hpp"
#include "stereonav/pose.hpp"
#include "stereonav/render.hpp"
#include "stereonav/robosim.hpp"
#include "stereonav/stereo_match.hpp"
#include "stereonav/world.hpp"
