#pragma once

#include "rcscm/checkpoint.hpp"
#include "rcscm/ilrma.hpp"
#include "rcscm/linalg.hpp"
#include "rcscm/metrics.hpp"
#include "rcscm/model.hpp"
#include "rcscm/parallel.hpp"
#include "rcscm/solver_accel.hpp"
#include "rcscm/solver_naive.hpp"
#include "rcscm/stft.hpp"
#include "rcscm/synth.hpp"
#include "rcscm/types.hpp"
#include "rcscm/verify.hpp"
#include "rcscm/wav.hpp"
#include "rcscm/wiener.hpp"
