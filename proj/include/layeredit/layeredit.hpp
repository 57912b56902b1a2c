#ifndef LAYEREDIT_LAYEREDIT_HPP
#define LAYEREDIT_LAYEREDIT_HPP

#include "attention.hpp"
#include "bcg.hpp"
#include "bench.hpp"
#include "denoiser.hpp"
#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "mask_io.hpp"
#include "memory.hpp"
#include "metrics.hpp"
#include "prompt.hpp"
#include "rng.hpp"
#include "session.hpp"
#include "tensor.hpp"

#endif
