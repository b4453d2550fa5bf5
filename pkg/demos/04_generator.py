# # Synthesizing per-station traffic
#
# The region's aggregate model divided by the station count gives the mean
# per-station profile m(t). Each cell is a lognormal draw whose log-mean is
# ln m(t) - sigma^2/2, so its expectation is exactly m(t).

import numpy as np

from celltide import REFERENCE_MODELS, SIGMA_PRESETS, STModel, generate, moment_match, validate

# +
model = STModel(REFERENCE_MODELS["park"], SIGMA_PRESETS["park"], n_stations=10_000,
                region_label="park")
gen = generate(model, hours=504, seed=2024)
print(gen.values.shape, gen.values.dtype)
# -

# Averaging over stations recovers the profile up to sampling noise of
# roughly sqrt(exp(sigma^2) - 1) / sqrt(N) per hour.

# +
rep = validate(gen)
print(f"nrmse of station mean = {rep.nrmse_mean_profile:.4f}")
print("periods (h):", [round(2 * np.pi / w, 1) for w in rep.dominant_frequencies.frequencies])
print("expected per-hour noise:", np.sqrt(np.expm1(model.sigma ** 2) / model.n_stations))
# -

# Moment matching goes the other way: from a target mean and variance to
# lognormal parameters.

# +
p = moment_match(5.0, 40.0)
print(p.mu, p.sigma, p.mean, p.variance)
