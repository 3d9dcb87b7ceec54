#pragma once

#include "cadiff/adm/diffusion.hpp"
#include "cadiff/adm/schedule.hpp"
#include "cadiff/adm/score_net.hpp"
#include "cadiff/adm/mixture.hpp"
