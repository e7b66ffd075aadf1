#pragma once

#include "wavecoh/types.hpp"
#include "wavecoh/wavecore.hpp"
#include "wavecoh/potentials.hpp"
#include "wavecoh/propagator.hpp"
#include "wavecoh/perturbation.hpp"
#include "wavecoh/bath.hpp"
#include "wavecoh/coherence.hpp"
#include "wavecoh/oracle.hpp"
#include "wavecoh/runner.hpp"
