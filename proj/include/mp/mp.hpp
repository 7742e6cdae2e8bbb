#pragma once

#include "mp/errors.hpp"
#include "mp/fusion.hpp"
#include "mp/gp.hpp"
#include "mp/io.hpp"
#include "mp/kernels.hpp"
#include "mp/metrics.hpp"
#include "mp/parallel.hpp"
#include "mp/so3.hpp"
#include "mp/ssgp.hpp"
#include "mp/synth.hpp"
