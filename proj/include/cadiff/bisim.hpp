#pragma once

#include "cadiff/bisim/losses.hpp"
#include "cadiff/bisim/mdp.hpp"
#include "cadiff/bisim/metric.hpp"
