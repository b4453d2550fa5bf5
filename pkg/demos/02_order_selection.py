# # How many components?
#
# Candidates are added strongest first; a component is kept only if it
# raises R^2 by at least ``min_gain``.

import numpy as np

from celltide import REFERENCE_MODELS, amplitude_spectrum, dominant_components, evaluate
from celltide import select_order

# +
hours = np.arange(504)
rng = np.random.default_rng(2)
for name, model in REFERENCE_MODELS.items():
    y = evaluate(model, hours) + rng.normal(0, 0.01 * model.a0, hours.size)
    cands = dominant_components(amplitude_spectrum(y), max_components=3, rel_threshold=0.05)
    rep = select_order(y, cands, min_gain=0.02)
    periods = [round(2 * np.pi / c.omega, 1) for c in rep.model.components]
    print(f"{name:7s} order {len(periods)}  periods {periods}  R^2 {rep.r_squared:.4f}")
