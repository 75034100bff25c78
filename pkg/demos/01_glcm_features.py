# %% [markdown]
# # Co-occurrence texture features
#
# A gray-level co-occurrence matrix counts how often level i sits next to
# level j at a fixed offset. Four statistics summarize it.

# %%
import numpy as np

from somtex.dataset import GrayImage
from somtex.glcm import FEATURE_NAMES, compute_glcm, features_from_glcm

# %% [markdown]
# Three 8-level textures: flat, a checkerboard, and noise.

# %%
rng = np.random.default_rng(0)
r, c = np.indices((16, 16))
textures = {
    "flat": np.full((16, 16), 3),
    "checker": np.where((r + c) % 2, 1, 6),
    "noise": rng.integers(0, 8, size=(16, 16)),
}

for name, pix in textures.items():
    glcm = compute_glcm(GrayImage(pix, 8), offset=(1, 0), G=8)
    f = features_from_glcm(glcm)
    print(f"{name:8s}", "  ".join(f"{n}={v:.3f}" for n, v in zip(FEATURE_NAMES, f.as_array())))

# %% [markdown]
# The matrix is symmetric and sums to one. A mask restricts the pairs to a
# region; an empty region gives zero features and a degenerate flag.

# %%
glcm = compute_glcm(textures["checker"], (1, 0), 8)
print(glcm.p[[1, 6]][:, [1, 6]], glcm.p.sum(), glcm.pair_count)

empty = compute_glcm(textures["noise"], (1, 0), 8, mask=np.zeros((16, 16), bool))
print(features_from_glcm(empty))
