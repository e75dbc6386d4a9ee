#pragma once

#include "ppcshape/errors.hpp"
#include "ppcshape/seed.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/capacity.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/pattern.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/dslm.hpp"
#include "ppcshape/ccdm.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/interleaver.hpp"
#include "ppcshape/pas.hpp"
#include "ppcshape/trellis.hpp"
#include "ppcshape/bcjr.hpp"
#include "ppcshape/turbo.hpp"
#include "ppcshape/dsp.hpp"
#include "ppcshape/metrics.hpp"
#include "ppcshape/link.hpp"
#include "ppcshape/config.hpp"
#include "ppcshape/experiments.hpp"
