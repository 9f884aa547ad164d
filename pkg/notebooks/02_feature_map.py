"""
From a table to quantum features
================================

Preprocess a synthetic table, fit couplings on the training rows only and map
every row to its vector of post-quench magnetizations.
"""

# %%
import numpy as np

from quenchmap.data import fit_preprocessing
from quenchmap.encoding import fit_couplings, format_couplings
from quenchmap.features import map_dataset
from quenchmap.quench import QuenchConfig
from quenchmap.schedule import AnnealSchedule
from quenchmap.synthetic import make_planted_dataset

data = make_planted_dataset(60, 6, seed=3)
processed, report = fit_preprocessing(data, top_k=None, mi_threshold=0.0)
print(processed.shape, "columns kept:", report.selected_columns)

# %%
couplings = fit_couplings(processed.values, corr_threshold=0.1)
print(format_couplings(couplings))

# %%
config = QuenchConfig(dt_ns=0.02, schedule=AnnealSchedule(tau_ns=10.0))
mapped = map_dataset(processed.values, processed.labels, couplings, config, include_zz=True)
print("feature matrix", mapped.features.shape)
print(np.round(mapped.features[:3], 3))

# %%
# Class-conditional means of the single-qubit features.
for label in (0, 1):
    rows = mapped.features[mapped.labels == label, : couplings.n]
    print(label, np.round(rows.mean(axis=0), 3))
