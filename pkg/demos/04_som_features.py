# %% [markdown]
# # SOM-based features
#
# A self-organizing map is trained on reduced feature vectors. Each vector
# can then be replaced by its best matching prototype, or have that
# prototype appended.

# %%
import numpy as np

from somtex.roi import FeatureDataset
from somtex.som import (SomConfig, augment, fit_som, init_som, quantization_error,
                        quantize_replace)

rng = np.random.default_rng(3)
centers = rng.normal(size=(3, 6)) * 4
labels = np.repeat(["NORM", "CALC", "CIRC"], 40)
X = centers[np.repeat(np.arange(3), 40)] + rng.normal(size=(120, 6))
data = FeatureDataset([f"r{i}" for i in range(120)], X, labels.tolist(),
                      [f"fisher_{j}" for j in range(6)], ["NORM", "CALC", "CIRC"])

# %%
for size in (5, 10, 15):
    cfg = SomConfig(size, size)
    before = quantization_error(init_som(cfg, X), X)
    som = fit_som(X, cfg)
    print(f"{cfg.label:6s} QE {before:.3f} -> {quantization_error(som, X):.3f}")

# %%
replaced = quantize_replace(som, data)
print("distinct rows after replace:", len({tuple(v) for v in replaced.X}))
combined = augment(data, replaced)
print("augmented dim:", combined.dim, combined.feature_names[:1], combined.feature_names[-1:])
