"""Shared fixtures: the fitted aero surrogate and SST dynamics are expensive
(roughly two minutes to fit and tabulate), so they are built once per session
and cached on disk keyed by the model content hash."""

import json
import pathlib

import numpy as np
import pytest

from robusttraj import aero, sst

CACHE_DIR = pathlib.Path(__file__).resolve().parent.parent / ".cache"


@pytest.fixture(scope="session")
def aero_modelset():
    CACHE_DIR.mkdir(exist_ok=True)
    cache = CACHE_DIR / "aero_models.json"
    if cache.exists():
        modelset, _ = aero.canonical_modelset(cache_text=cache.read_text())
        return modelset
    modelset, text = aero.canonical_modelset()
    cache.write_text(text)
    return modelset


@pytest.fixture(scope="session")
def sst_dynamics(aero_modelset):
    cache = CACHE_DIR / "aero_table.npz"
    meta = CACHE_DIR / "aero_table_meta.json"
    if cache.exists() and meta.exists():
        info = json.loads(meta.read_text())
        table = aero.table_from_npz(cache)
        return sst.SstDynamics(aero_modelset, table, aero_modelset.vehicle,
                               table_tolerance=info["tolerance"])
    dyn = sst.SstDynamics.build(aero_modelset)
    aero.table_to_npz(dyn.table, cache)
    meta.write_text(json.dumps({"tolerance": dyn.table_tolerance}))
    return dyn
