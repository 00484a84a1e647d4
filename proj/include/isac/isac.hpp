#pragma once

#include "isac/beamforming.hpp"
#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/fusion.hpp"
#include "isac/geometry.hpp"
#include "isac/montecarlo.hpp"
#include "isac/rng.hpp"
#include "isac/stage1.hpp"
#include "isac/stage2.hpp"
