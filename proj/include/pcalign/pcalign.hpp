#pragma once

#include "pcalign/aligner.hpp"
#include "pcalign/colorxform.hpp"
#include "pcalign/geometry.hpp"
#include "pcalign/io.hpp"
#include "pcalign/robustloss.hpp"
#include "pcalign/sampler.hpp"
#include "pcalign/synthbench.hpp"
