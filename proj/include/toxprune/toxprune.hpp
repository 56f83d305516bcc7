#pragma once

#include "toxprune/decoding.hpp"
#include "toxprune/errors.hpp"
#include "toxprune/experiment.hpp"
#include "toxprune/io.hpp"
#include "toxprune/lm.hpp"
#include "toxprune/metrics.hpp"
#include "toxprune/prunelist.hpp"
#include "toxprune/tokenizer.hpp"
