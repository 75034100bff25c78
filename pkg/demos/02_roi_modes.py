# %% [markdown]
# # Three ways to choose where texture is measured
#
# * fixed_bloc: a 3x2 grid of sub-images, each cut into 4x2 blocs
# * pixel_wise: each sub-image split into 3 intensity clusters
# * bloc_wise: blocs clustered by their own texture features

# %%
import numpy as np

from somtex.roi import PartitionConfig, extract, kmeans, split_grid
from somtex.synthetic import mias_like_manifest

image = mias_like_manifest(shape=(96, 64), seed=1).records[0].image
print(image.pixels.shape, image.levels)

# %%
for mode in ("fixed_bloc", "pixel_wise", "bloc_wise"):
    cfg = PartitionConfig(mode)
    flags = []
    vec = extract(image, cfg, flags)
    print(f"{mode:11s} SN={cfg.SN} dim={cfg.dim} first names={cfg.feature_names()[:2]}",
          f"flags={len(flags)}")

# %% [markdown]
# Pixel clustering works on the intensity histogram, so it is cheap even on
# full-size mammograms. The extractor orders clusters by centroid, darkest first.

# %%
sub = split_grid(image.pixels, 3, 2)[0]
levels, counts = np.unique(sub, return_counts=True)
model = kmeans(levels[:, None].astype(float), 3, seed=0, weights=counts)
print(np.sort(model.centroids.ravel()), model.n_iter, model.history[:3])
