#pragma once

#include "cadiff/harness/config.hpp"
#include "cadiff/harness/metrics.hpp"
#include "cadiff/harness/pipeline.hpp"
#include "cadiff/harness/replay.hpp"
#include "cadiff/harness/sweep.hpp"
#include "cadiff/harness/trainer.hpp"
#include "cadiff/harness/verify.hpp"
