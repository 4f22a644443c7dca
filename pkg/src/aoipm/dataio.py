"""Ingestion and preprocessing of run-to-failure turbofan data.

Input files are whitespace-separated numeric text with 26 columns per row:
unit id, cycle, 3 operational settings, 21 sensor readings.  Preprocessing
drops the settings columns and any sensor that never varies across the
training simulations; the retained column set computed on training data is
applied unchanged to test data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import AlignmentError, DataLoadError, EmptyFeatureError

NUM_SETTINGS = 3
NUM_SENSORS = 21
NUM_COLUMNS = 2 + NUM_SETTINGS + NUM_SENSORS


@dataclass(frozen=True)
class Simulation:
    """One unit's full recorded history, cycles contiguous from 1."""

    unit_id: int
    values: np.ndarray  # (cycles, retained columns)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Dataset:
    simulations: tuple
    retained: tuple  # column indexes into the original 26-column layout
    source: str
    checksum: str


def _file_checksum(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def load_cmapss(path):
    """Load a 26-column run-to-failure file, grouped per unit."""
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != NUM_COLUMNS:
                raise DataLoadError(
                    f"expected {NUM_COLUMNS} columns, got {len(parts)}", line_no
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataLoadError("non-numeric field", line_no) from None
    if not rows:
        raise DataLoadError(f"{path}: empty data file")
    data = np.asarray(rows)
    sims = []
    for unit in np.unique(data[:, 0]).astype(int):
        block = data[data[:, 0] == unit]
        order = np.argsort(block[:, 1], kind="stable")
        block = block[order]
        cycles = block[:, 1].astype(int)
        if not np.array_equal(cycles, np.arange(1, len(cycles) + 1)):
            raise DataLoadError(f"unit {unit}: cycles not contiguous from 1")
        sims.append(Simulation(unit_id=int(unit), values=block))
    return Dataset(
        simulations=tuple(sims),
        retained=tuple(range(NUM_COLUMNS)),
        source=str(path),
        checksum=_file_checksum(path),
    )


def _restrict(ds, retained):
    cols = list(retained)
    sims = tuple(
        Simulation(unit_id=s.unit_id, values=s.values[:, cols]) for s in ds.simulations
    )
    return replace(ds, simulations=sims, retained=tuple(retained))


def drop_operational_settings(ds):
    """Remove the 3 settings columns (and the unit/cycle bookkeeping columns)."""
    sensor_cols = [c for c in ds.retained if c >= 2 + NUM_SETTINGS]
    if tuple(ds.retained) == tuple(sensor_cols):
        return ds
    keep_pos = [i for i, c in enumerate(ds.retained) if c in sensor_cols]
    sims = tuple(
        Simulation(unit_id=s.unit_id, values=s.values[:, keep_pos]) for s in ds.simulations
    )
    return replace(ds, simulations=sims, retained=tuple(sensor_cols))


def drop_constant_attributes(ds, tolerance=0.0, retained=None):
    """Drop sensors whose global range is <= ``tolerance``.

    Computed over this (training) dataset unless an explicit ``retained`` set
    from a previous call is supplied, in which case it is applied as-is so the
    test data keeps identical columns.
    """
    if retained is not None:
        keep_pos = [i for i, c in enumerate(ds.retained) if c in retained]
        if len(keep_pos) != len(retained):
            raise AlignmentError("retained columns not present in dataset")
        sims = tuple(
            Simulation(unit_id=s.unit_id, values=s.values[:, keep_pos])
            for s in ds.simulations
        )
        return replace(ds, simulations=sims, retained=tuple(retained))
    stacked = np.vstack([s.values for s in ds.simulations])
    rng = stacked.max(axis=0) - stacked.min(axis=0)
    keep_pos = [i for i in range(stacked.shape[1]) if rng[i] > tolerance]
    if not keep_pos:
        raise EmptyFeatureError("every attribute is constant at this tolerance")
    new_retained = tuple(ds.retained[i] for i in keep_pos)
    sims = tuple(
        Simulation(unit_id=s.unit_id, values=s.values[:, keep_pos]) for s in ds.simulations
    )
    return replace(ds, simulations=sims, retained=new_retained)


def preprocess_train(ds, tolerance=0.0):
    """Standard training preprocessing; returns (dataset, retained columns)."""
    ds = drop_operational_settings(ds)
    ds = drop_constant_attributes(ds, tolerance=tolerance)
    return ds, ds.retained


def preprocess_test(ds, retained):
    """Apply a training-derived retained column set to test data."""
    ds = drop_operational_settings(ds)
    return drop_constant_attributes(ds, retained=retained)


def load_rul_truth(path, num_units=None):
    """One non-negative true-RUL integer per test unit, in unit order."""
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                v = int(float(line.split()[0]))
            except ValueError:
                raise DataLoadError("non-numeric RUL value", line_no) from None
            if v < 0:
                raise DataLoadError("negative RUL value", line_no)
            values.append(v)
    if num_units is not None and len(values) != num_units:
        raise AlignmentError(
            f"RUL file has {len(values)} entries but there are {num_units} test units"
        )
    return values
