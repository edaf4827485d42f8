"""The free boundary flux law G, its structural checks, rescaling, and
two-plane profiles.

G maps the negative-phase normal slope to the positive-phase normal slope at
the interface.  Three kinds are supported: the smooth benchmark sqrt(1+t^2),
affine laws, and tabulated laws (monotone piecewise-linear interpolation with
end-segment extrapolation).  Tabulated laws make the family closed under the
rescaling G -> r^(1-a) G(r^(a-1) t) without symbolic machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DomainError, InputError, InvariantError
from .grid import GridSpec, ScalarField

LAW_KINDS = ("sqrt1p", "linear", "tabulated")

_LAW_CODES = {
    "sqrt1p": _kernels.LAW_SQRT1P,
    "linear": _kernels.LAW_LINEAR,
    "tabulated": _kernels.LAW_TABULATED,
}

# sample density for tabulated rescales: 512 points per decade over this range
TABLE_T_MIN = 1e-6
TABLE_T_MAX = 1e6
TABLE_PER_DECADE = 512


@dataclass(frozen=True)
class JumpLaw:
    """Strictly increasing flux law on [0, inf) with thresholds.

    M bounds the region where the two-sided comparability and the derivative
    band are asserted; sigma is the comparability constant; delta_band the
    admissible deviation of G' from 1 beyond M.
    """

    kind: str
    slope: float = 1.0
    intercept: float = 0.0
    table_t: Optional[np.ndarray] = None
    table_g: Optional[np.ndarray] = None
    M: float = 1.0
    sigma: float = 0.5
    delta_band: float = 0.1

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ConfigurationError(f"unknown law kind {self.kind!r}")
        if not (0 < self.sigma <= 1):
            raise ConfigurationError(f"sigma = {self.sigma} outside (0, 1]")
        for name in ("M", "slope", "intercept", "delta_band"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if self.kind == "linear":
            if self.slope <= 0:
                raise ConfigurationError("linear law needs slope > 0 (strict monotonicity)")
            if self.intercept < 0:
                raise ConfigurationError("linear law needs intercept >= 0 (G maps into [0, inf))")
        if self.kind == "tabulated":
            ts = np.ascontiguousarray(self.table_t, dtype=np.float64)
            gs = np.ascontiguousarray(self.table_g, dtype=np.float64)
            if ts.ndim != 1 or ts.shape != gs.shape or ts.size < 2:
                raise ConfigurationError("tabulated law needs matching 1-d arrays with >= 2 rows")
            if not (np.all(np.diff(ts) > 0) and np.all(np.diff(gs) > 0)):
                raise ConfigurationError("tabulated law requires strictly increasing columns")
            if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(gs))):
                raise ConfigurationError("tabulated law contains non-finite entries")
            ts.setflags(write=False)
            gs.setflags(write=False)
            object.__setattr__(self, "table_t", ts)
            object.__setattr__(self, "table_g", gs)
        elif self.table_t is not None or self.table_g is not None:
            raise ConfigurationError("only tabulated laws carry a table")

    def kernel_args(self):
        """(code, p0, p1, ts, gs) bundle for the compiled sweep kernels."""
        empty = np.empty(0)
        if self.kind == "tabulated":
            return _LAW_CODES[self.kind], 0.0, 0.0, self.table_t, self.table_g
        return _LAW_CODES[self.kind], self.slope, self.intercept, empty, empty


def identity_law(M: float = 1.0, sigma: float = 0.5, delta_band: float = 0.1) -> JumpLaw:
    return JumpLaw(kind="linear", slope=1.0, intercept=0.0, M=M, sigma=sigma,
                   delta_band=delta_band)


def g_eval(law: JumpLaw, t):
    """G(t) for scalar or array t >= 0 (DomainError otherwise)."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise DomainError("the flux law is only defined for t >= 0")
    if law.kind == "sqrt1p":
        out = np.sqrt(1.0 + arr * arr)
    elif law.kind == "linear":
        out = law.slope * arr + law.intercept
    else:
        ts, gs = law.table_t, law.table_g
        j = np.clip(np.searchsorted(ts, arr, side="right") - 1, 0, ts.size - 2)
        slope = (gs[j + 1] - gs[j]) / (ts[j + 1] - ts[j])
        out = gs[j] + slope * (arr - ts[j])
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


@dataclass(frozen=True)
class AsymptoticsReport:
    limit_ok: bool
    second_order_ok: bool
    band_ok: bool
    ts: np.ndarray = dc_field(repr=False)
    gprime: np.ndarray = dc_field(repr=False)
    t_gpp: np.ndarray = dc_field(repr=False)

    @property
    def all_ok(self) -> bool:
        return self.limit_ok and self.second_order_ok and self.band_ok


def check_asymptotics(law: JumpLaw, t_max: float, delta: float,
                      samples: int = 257) -> AsymptoticsReport:
    """Empirical trace of the large-slope behavior of G on [M, t_max].

    limit_ok:        |G' - 1| trends down (noise-tolerant) and ends <= delta.
    second_order_ok: |t G''| shows no growth from the first half of the grid
                     to the second, the samplable proxy for G'' = O(1/t).
    band_ok:         |G' - 1| <= delta on the whole grid.

    Derivatives use central differences with relative step t * 1e-5.
    """
    if not t_max > law.M:
        raise InputError(f"t_max = {t_max} must exceed law.M = {law.M}")
    if not (0 < delta < 1):
        raise InputError(f"delta = {delta} outside (0, 1)")
    lo = max(law.M, 1e-8)
    ts = np.geomspace(lo, t_max, samples)
    g0 = g_eval(law, ts)
    if not np.all(np.diff(g0) > 0):
        raise InvariantError("law is not strictly increasing on the sample grid")
    step = ts * 1e-5
    gp = (g_eval(law, ts + step) - g_eval(law, ts - step)) / (2 * step)
    gpp = (g_eval(law, ts + step) - 2 * g0 + g_eval(law, ts - step)) / step ** 2
    dev = np.abs(gp - 1.0)
    tgpp = np.abs(ts * gpp)

    trend_down = bool(np.all(dev[1:] <= np.maximum(dev[:-1] * 1.10, dev[:-1] + 1e-7)))
    limit_ok = trend_down and dev[-1] <= delta
    half = samples // 2
    second_order_ok = bool(np.max(tgpp[half:]) <= 1.1 * np.max(tgpp[:half]) + 1e-6)
    band_ok = bool(np.all(dev <= delta))
    return AsymptoticsReport(limit_ok=limit_ok, second_order_ok=second_order_ok,
                             band_ok=band_ok, ts=ts, gprime=gp, t_gpp=tgpp)


def check_two_sided(law: JumpLaw, sigma: float, t_max: float) -> bool:
    """True iff sigma*t <= G(t) <= t/sigma on a dense sample of (law.M, t_max]."""
    if not (0 < sigma <= 1):
        raise InputError(f"sigma = {sigma} outside (0, 1]")
    if not t_max > law.M:
        raise InputError(f"t_max = {t_max} must exceed law.M = {law.M}")
    ts = np.linspace(law.M, t_max, 10_001)[1:]
    gs = g_eval(law, ts)
    return bool(np.all(gs >= sigma * ts) and np.all(gs <= ts / sigma))


def rescale_law(law: JumpLaw, r: float, alpha_exp: float) -> JumpLaw:
    """Tabulated law t -> r^(1-a) G(r^(a-1) t), the flux law seen by the
    rescaled field u(r x) / r^a.

    Sampled at t = 0 plus a geometric grid; when the input satisfies the
    two-sided comparability beyond M, the output is verified to satisfy it
    beyond the same threshold (the blow-up argument relies on exactly this
    closure).
    """
    if not (0 < r <= 1):
        raise InputError(f"r = {r} outside (0, 1]")
    if not (0 < alpha_exp < 1):
        raise InputError(f"alpha_exp = {alpha_exp} outside (0, 1)")
    decades = np.log10(TABLE_T_MAX / TABLE_T_MIN)
    count = int(round(decades * TABLE_PER_DECADE)) + 1
    ts = np.concatenate(([0.0], np.geomspace(TABLE_T_MIN, TABLE_T_MAX, count)))
    outer = r ** (1.0 - alpha_exp)
    inner = r ** (alpha_exp - 1.0)
    gs = outer * g_eval(law, inner * ts)
    if not np.all(np.diff(gs) > 0):
        raise InvariantError("rescaled law lost strict monotonicity on the sample grid")
    out = JumpLaw(kind="tabulated", table_t=ts, table_g=gs, M=law.M,
                  sigma=law.sigma, delta_band=law.delta_band)
    probe_max = max(10.0 * law.M, 100.0)
    if check_two_sided(law, law.sigma, probe_max) and not check_two_sided(out, law.sigma, probe_max):
        raise InvariantError("rescaling broke the two-sided comparability it must preserve")
    return out


@dataclass(frozen=True)
class TwoPlane:
    """The profile alpha*((x-x0).nu)^+ - beta*((x-x0).nu)^- with alpha = G(beta)."""

    beta: float
    alpha: float
    nu: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        nu = np.ascontiguousarray(self.nu, dtype=np.float64)
        x0 = np.ascontiguousarray(self.x0, dtype=np.float64)
        if self.beta < 0:
            raise InputError(f"beta = {self.beta} must be >= 0")
        if not self.alpha > 0:
            raise InputError(f"alpha = {self.alpha} must be > 0")
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise InputError(f"|nu| = {np.linalg.norm(nu)} is not 1 to 1e-12")
        nu.setflags(write=False)
        x0.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "x0", x0)

    def profile(self, points: np.ndarray) -> np.ndarray:
        s = (points - self.x0) @ self.nu
        return self.alpha * np.maximum(s, 0.0) - self.beta * np.maximum(-s, 0.0)


def two_plane(law: JumpLaw, beta: float, nu, x0=None) -> TwoPlane:
    """TwoPlane with the positive slope forced to G(beta)."""
    nu = np.asarray(nu, dtype=np.float64)
    if x0 is None:
        x0 = np.zeros(nu.size)
    return TwoPlane(beta=float(beta), alpha=g_eval(law, float(beta)),
                    nu=nu, x0=np.asarray(x0, dtype=np.float64))


def two_plane_field(grid: GridSpec, plane: TwoPlane) -> ScalarField:
    if plane.nu.size != grid.n:
        raise InputError(f"plane direction has {plane.nu.size} components for an "
                         f"n = {grid.n} grid")
    return ScalarField(grid, plane.profile(grid.points()))
