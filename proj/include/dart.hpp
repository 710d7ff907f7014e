#pragma once

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/estimate.hpp"
#include "dart/latent_model.hpp"
#include "dart/observation.hpp"
#include "dart/random.hpp"
#include "dart/renewal.hpp"
#include "dart/scenario.hpp"
#include "dart/smc.hpp"
#include "dart/config.hpp"
#include "dart/io.hpp"
