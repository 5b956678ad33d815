#pragma once

#include "regime_bench/core_data.hpp"
#include "regime_bench/error.hpp"
#include "regime_bench/imputers.hpp"
#include "regime_bench/io.hpp"
#include "regime_bench/mask.hpp"
#include "regime_bench/metrics.hpp"
#include "regime_bench/missingness.hpp"
#include "regime_bench/parallel.hpp"
#include "regime_bench/protocols.hpp"
#include "regime_bench/router.hpp"
#include "regime_bench/rng.hpp"
#include "regime_bench/synth.hpp"
#include "regime_bench/types.hpp"
