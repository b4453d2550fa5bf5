# # Periodic structure of aggregate traffic
#
# Build an hourly traffic series from a reference model, add noise, then
# recover the model: amplitude spectrum, dominant daily harmonics, linear
# least-squares fit.

import numpy as np

from celltide import REFERENCE_MODELS, amplitude_spectrum, dominant_components, evaluate, fit

# +
truth = REFERENCE_MODELS["whole"]
hours = np.arange(504)  # three weeks
rng = np.random.default_rng(1)
series = evaluate(truth, hours) + rng.normal(0, 0.05 * truth.a0, hours.size)
print(truth)
# -

# The spectrum is computed on the mean-subtracted series. Only multiples of
# the 24 h frequency are candidates; the strongest few above 15% of the
# largest are kept.

# +
spec = amplitude_spectrum(series)
comps = dominant_components(spec)
for w, a in zip(comps.frequencies, comps.amplitudes):
    print(f"omega = {w:.4f} rad/h  period = {2 * np.pi / w:5.1f} h  amplitude ~ {a:.2f}")
# -

# With the frequencies fixed the fit is linear in (a0, sin, cos)
# coefficients, and amplitude/phase follow from them.

# +
report = fit(series, comps)
print(f"R^2 = {report.r_squared:.4f}, residual rms = {report.residual_rms:.2f}")
for got, want in zip(report.model.components, truth.components):
    print(f"period {2 * np.pi / got.omega:5.1f} h: amplitude {got.amplitude:7.2f} "
          f"(true {want.amplitude:6.2f}), phase {got.phase:+.3f} (true {want.phase:+.3f})")
# -

# Models serialize to JSON and round-trip exactly.

# +
text = report.model.to_json()
print(text)
assert type(report.model).from_json(text) == report.model
