#pragma once

#include "milac/beamforming_core.hpp"
#include "milac/channel_model.hpp"
#include "milac/core.hpp"
#include "milac/matrix_io.hpp"
#include "milac/microwave_network.hpp"
#include "milac/sim_harness.hpp"
#include "milac/verification.hpp"
