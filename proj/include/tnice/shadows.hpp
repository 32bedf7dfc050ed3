#pragma once

#include "tnice/estimator.hpp"
#include "tnice/observable.hpp"
#include "tnice/sampling.hpp"

namespace tnice {

// Classical-shadows baseline: omega_k = Tr[O (x)_i D_{k_i}] with D the
// canonical duals. Site-wise this is the 4 -> s linear map <<D_k| applied to
// the observable MPS, so bond extents match the observable's.
EstimatorMps canonical_estimator(const ObservableMps& obs, const ProductPovm& povm);

// E[omega^2] under the model: <<omega|P|omega>> in Exact mode, the
// frequency-weighted average of omega^2 in Empirical mode.
double second_moment(const EstimatorMps& est, const ProbabilityModel& pm);

// E[omega] under the model.
double mean_value(const EstimatorMps& est, const ProbabilityModel& pm);

} // namespace tnice
