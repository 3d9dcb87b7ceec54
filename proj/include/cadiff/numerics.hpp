#pragma once

#include "cadiff/numerics/adam.hpp"
#include "cadiff/numerics/checkpoint.hpp"
#include "cadiff/numerics/layers.hpp"
#include "cadiff/numerics/param_set.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tape.hpp"
#include "cadiff/numerics/tensor.hpp"
#include "cadiff/numerics/gradcheck.hpp"
