#ifndef EDGLM_EDGLM_HPP
#define EDGLM_EDGLM_HPP

#include "edglm/errors.hpp"
#include "edglm/special_functions.hpp"
#include "edglm/numerics.hpp"
#include "edglm/family.hpp"
#include "edglm/kappa.hpp"
#include "edglm/model_spec.hpp"
#include "edglm/filter.hpp"
#include "edglm/forecast.hpp"
#include "edglm/metrics.hpp"
#include "edglm/synth.hpp"

#endif  // EDGLM_EDGLM_HPP
