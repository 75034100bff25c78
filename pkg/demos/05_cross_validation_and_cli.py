# %% [markdown]
# # Cross-validation and the batch pipeline
#
# First the library call: 10-fold CV on synthetic textures, with transforms
# fitted on each training fold only.

# %%
import subprocess
import sys
import tempfile
from pathlib import Path

from somtex.evaluation import evaluate_manifest
from somtex.roi import PartitionConfig
from somtex.som import SomConfig
from somtex.synthetic import texture_manifest

manifest = texture_manifest(n_per_class=30, shape=(48, 32))
report = evaluate_manifest(manifest, PartitionConfig("fixed_bloc"), som_mode="replace",
                           som_cfg=SomConfig(5, 5), k=10)
print(f"accuracy {report.overall_accuracy:.3f}  sensitivity {report.sensitivity:.3f}  "
      f"specificity {report.specificity:.3f}  fingerprint {report.fingerprint}")

# %% [markdown]
# The same pipeline from a config file. A tiny MIAS-shaped directory is
# generated here; point data_root at the real MIAS distribution instead.

# %%
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from mias_fixture import write_mias_dir  # noqa: E402

work = Path(tempfile.mkdtemp())
write_mias_dir(work / "mias", {"NORM": 6, "CALC": 6, "CIRC": 6})
(work / "run.cfg").write_text(
    "data_root = mias\noutput = out\nfolds = 3\nsom_iterations = 500\n"
    "map_sizes = 3x3, 4x4\naugment_map_size = 3x3\nclassifiers = 1nn, gnb\n")
subprocess.run([sys.executable, "-m", "somtex", "run", str(work / "run.cfg")], check=True)
print((work / "out" / "report.txt").read_text())
