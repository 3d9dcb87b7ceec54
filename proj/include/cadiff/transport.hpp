#pragma once

#include "cadiff/transport/simplex.hpp"
#include "cadiff/transport/wasserstein.hpp"
