#pragma once

#include "voxtok/checkpoint.hpp"
#include "voxtok/codec.hpp"
#include "voxtok/curriculum.hpp"
#include "voxtok/error.hpp"
#include "voxtok/evaluation.hpp"
#include "voxtok/haar3d.hpp"
#include "voxtok/lfq.hpp"
#include "voxtok/losses.hpp"
#include "voxtok/metrics.hpp"
#include "voxtok/optim.hpp"
#include "voxtok/phantom.hpp"
#include "voxtok/preprocess.hpp"
#include "voxtok/rtok.hpp"
#include "voxtok/run_config.hpp"
#include "voxtok/rvol.hpp"
#include "voxtok/tiling.hpp"
