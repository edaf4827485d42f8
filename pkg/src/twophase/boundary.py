"""Boundary-data catalog for the experiment runner.

Catalog ids: two_plane, scaled_two_plane, harmonic_mode, custom_table.  Each
entry is evaluated on the full node enumeration (shell entries become the
Dirichlet data, interior entries seed the solver); lists of entries are
summed, which is how perturbed profiles are expressed.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grid import GridSpec, ScalarField, field_from_csv
from .jump import JumpLaw, two_plane, two_plane_field

CATALOG_IDS = ("two_plane", "scaled_two_plane", "harmonic_mode", "custom_table")
HARMONIC_FORMS = ("linear", "saddle", "cross", "sin")


def _unit(vec, n):
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (n,):
        raise ConfigurationError(f"direction needs {n} components, got {v.shape}")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigurationError("direction must be nonzero")
    return v / norm


def _entry_values(grid: GridSpec, law: JumpLaw, entry: dict) -> np.ndarray:
    entry = dict(entry)
    kind = entry.pop("id", None)
    if kind not in CATALOG_IDS:
        raise ConfigurationError(f"unknown boundary catalog id {kind!r}; "
                                 f"choose one of {CATALOG_IDS}")
    pts = grid.points()
    if kind in ("two_plane", "scaled_two_plane"):
        beta = float(entry.pop("beta", 1.0))
        nu = _unit(entry.pop("nu", [0.0] * (grid.n - 1) + [1.0]), grid.n)
        x0 = np.asarray(entry.pop("x0", [0.0] * grid.n), dtype=np.float64)
        scale = float(entry.pop("scale", 1.0)) if kind == "scaled_two_plane" else 1.0
        if scale <= 0:
            raise ConfigurationError("scale must be positive")
        plane = two_plane(law, beta, nu, x0)
        vals = scale * two_plane_field(grid, plane).values
    elif kind == "harmonic_mode":
        form = entry.pop("form", "linear")
        amplitude = float(entry.pop("amplitude", 1.0))
        if form not in HARMONIC_FORMS:
            raise ConfigurationError(f"unknown harmonic_mode form {form!r}; "
                                     f"choose one of {HARMONIC_FORMS}")
        if form == "linear":
            nu = _unit(entry.pop("direction", [0.0] * (grid.n - 1) + [1.0]), grid.n)
            vals = amplitude * (pts @ nu)
        elif form == "saddle":
            i, j = entry.pop("axes", (0, 1))
            vals = amplitude * (pts[:, i] ** 2 - pts[:, j] ** 2)
        elif form == "cross":
            i, j = entry.pop("axes", (0, 1))
            vals = amplitude * pts[:, i] * pts[:, j]
        else:  # sin: amplitude * sin(pi * (wave . x) / R), a boundary wiggle
            wave = np.asarray(entry.pop("wave", [1.0] * grid.n), dtype=np.float64)
            if wave.shape != (grid.n,):
                raise ConfigurationError(f"wave needs {grid.n} components")
            vals = amplitude * np.sin(np.pi * (pts @ wave) / grid.R)
        offset = float(entry.pop("offset", 0.0))
        vals = vals + offset
    else:  # custom_table
        path = entry.pop("path", None)
        if path is None:
            raise ConfigurationError("custom_table needs a path")
        vals = field_from_csv(path, grid).values.copy()
    if entry:
        raise ConfigurationError(f"unknown keys in boundary entry: {sorted(entry)}")
    return vals


def make_boundary_field(grid: GridSpec, law: JumpLaw, spec) -> ScalarField:
    """Evaluate one catalog entry (dict) or a sum of entries (list of dicts)."""
    entries = spec if isinstance(spec, (list, tuple)) else [spec]
    if not entries:
        raise ConfigurationError("boundary block is empty")
    total = np.zeros(grid.node_count)
    for entry in entries:
        total += _entry_values(grid, law, entry)
    return ScalarField(grid, total)
