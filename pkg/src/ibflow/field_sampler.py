"""Exact joint-Gaussian increments on finite point sets, plus drift fields.

For Euler stepping only the increment law on the tracked points matters,
and on a finite point set that law is exactly N(0, C * dt) with block
covariance C[i][j] = b(x_i - x_j). Sampling it through a Cholesky factor
is free of any truncation error. Nearly coincident tracers (they arise
under contraction) make C numerically rank-deficient; an escalating
diagonal jitter keeps runs alive, and the jitter actually used is
reported, never hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rkhs
from .covariance import IbfModel, ModelError

JITTER_BASE = 1e-12   # first rung is JITTER_BASE * n_points
JITTER_CAP = 1e-6
DRIFT_KINDS = ("none", "linear", "radial_rkhs", "custom_table")


class DegenerateCloudError(RuntimeError):
    """Covariance factorization failed even at maximal jitter."""

    def __init__(self, pair: tuple[int, int], distance: float,
                 path_index: int | None = None):
        self.pair = pair
        self.distance = distance
        self.path_index = path_index
        where = "" if path_index is None else f" (path {path_index})"
        super().__init__(
            f"covariance factorization failed at maximal jitter {JITTER_CAP}"
            f"{where}; most-duplicated point pair {pair} at distance "
            f"{distance:.3e}")


class DriftEvaluationError(RuntimeError):
    """Drift queried outside its domain of definition."""


def _positions(points) -> np.ndarray:
    pos = getattr(points, "positions", points)
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    if not np.all(np.isfinite(pos)):
        raise ValueError("point positions must be finite")
    return pos


# ---------------------------------------------------------------------------
# drift fields

@dataclass(eq=False)
class DriftField:
    """Deterministic drift v(x); every kind is globally Lipschitz.

    kinds: "none"; "linear" (v = A x); "radial_rkhs" (scale times the
    mean inward field of a model at radius rho, radially symmetric by
    construction); "custom_table" (multilinear interpolation on a grid,
    constant beyond it).
    """

    kind: str
    matrix: np.ndarray | None = None
    model: IbfModel | None = None
    rho: float | None = None
    scale: float = 1.0
    resolution: int | None = None
    axes: tuple[np.ndarray, ...] | None = None
    table: np.ndarray | None = None
    _profile: object = field(default=None, repr=False)
    _rule: object = field(default=None, repr=False)
    _interp: object = field(default=None, repr=False)

    def lipschitz_constant(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "linear":
            return float(np.linalg.norm(self.matrix, 2))
        if self.kind == "radial_rkhs":
            spline = self._profile
            if spline is None:
                raise ModelError(
                    "unbound radial drift: build it with drift_radial_rkhs")
            grid = spline.x
            slope = np.max(np.abs(spline(grid, 1)))
            secant = np.max(np.abs(spline(grid[1:]) / grid[1:]))
            return abs(self.scale) * float(max(slope, secant))
        if self.kind == "custom_table":
            worst = 0.0
            for axis in range(len(self.axes)):
                diff = np.diff(self.table, axis=axis)
                steps = np.diff(self.axes[axis])
                shape = [1] * self.table.ndim
                shape[axis] = steps.size
                worst = max(worst, float(np.max(np.abs(diff) / steps.reshape(shape))))
            return worst
        raise ModelError(f"unknown drift kind {self.kind!r}")


def drift_none() -> DriftField:
    return DriftField(kind="none")


def drift_linear(matrix) -> DriftField:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.all(np.isfinite(a)):
        raise ModelError("linear drift needs a finite square matrix")
    return DriftField(kind="linear", matrix=a)


def _default_rule_resolution(d: int) -> int:
    return {2: 256, 3: 24}.get(d, 512)


def drift_radial_rkhs(model: IbfModel, rho: float, scale: float = 1.0,
                      resolution: int | None = None, r_max: float | None = None,
                      grid_points: int = 2048) -> DriftField:
    """Drift scale * V with V the mean inward field at radius rho.

    V is radially symmetric, so its radial profile is precomputed once
    by sphere quadrature on a dense grid and interpolated with a cubic
    spline (interpolation error is far below quadrature error); queries
    beyond the grid fall back to direct quadrature.
    """
    from scipy.interpolate import CubicSpline

    if rho <= 0.0:
        raise ModelError("rho must be > 0")
    res = resolution if resolution is not None else _default_rule_resolution(model.d)
    rule = rkhs.sphere_rule(model.d, res)
    r_top = r_max if r_max is not None else 12.0 * rho
    grid = np.linspace(0.0, r_top, grid_points)
    probe = np.zeros((grid_points, model.d))
    probe[:, 0] = grid
    g = rkhs.mean_inward_field(model, rho, rule, probe)[:, 0]
    g[0] = 0.0  # exact by symmetry of the sphere average
    spline = CubicSpline(grid, g)
    return DriftField(kind="radial_rkhs", model=model, rho=float(rho),
                      scale=float(scale), resolution=res,
                      _profile=spline, _rule=rule)


def drift_custom_table(axes, values) -> DriftField:
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    table = np.asarray(values, dtype=float)
    d = len(axes)
    if table.shape != tuple(a.size for a in axes) + (d,):
        raise ModelError("table shape must be grid shape plus a trailing "
                         "component axis")
    if not np.all(np.isfinite(table)):
        raise ModelError("table values must be finite")
    for a in axes:
        if a.size < 2 or np.any(np.diff(a) <= 0.0):
            raise ModelError("each axis needs at least 2 strictly increasing points")
    return DriftField(kind="custom_table", axes=axes, table=table)


def _eval_radial(v: DriftField, pts: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(pts, axis=-1)
    spline = v._profile
    inside = r <= spline.x[-1]
    g = np.empty_like(r)
    g[inside] = spline(r[inside])
    if np.any(~inside):
        far = pts[~inside]
        g[~inside] = np.einsum(
            "md,md->m",
            rkhs.mean_inward_field(v.model, v.rho, v._rule, far),
            far) / r[~inside]
    unit = np.divide(pts, r[..., None], out=np.zeros_like(pts),
                     where=r[..., None] > 0.0)
    return v.scale * g[..., None] * unit


def eval_drift(v: DriftField, x, model_ctx=None, t: float = 0.0) -> np.ndarray:
    """Evaluate the drift at x (vectorized over leading axes).

    model_ctx = (model, rule) supplies the binding for a radial field
    built without one (config round-trips). Every kind is autonomous;
    the time argument is reserved in the interface and ignored.
    """
    del t
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    flat = pts.reshape(-1, pts.shape[-1])
    if v.kind == "none":
        out = np.zeros_like(flat)
    elif v.kind == "linear":
        out = flat @ v.matrix.T
    elif v.kind == "radial_rkhs":
        if v._profile is None:
            if model_ctx is None:
                raise ModelError("unbound radial drift needs model_ctx")
            model, rule = model_ctx
            out = v.scale * rkhs.mean_inward_field(model, v.rho, rule, flat)
        else:
            out = _eval_radial(v, flat)
    elif v.kind == "custom_table":
        if not np.all(np.isfinite(flat)):
            raise DriftEvaluationError("custom_table queried at non-finite point")
        if v._interp is None:
            from scipy.interpolate import RegularGridInterpolator
            v._interp = RegularGridInterpolator(v.axes, v.table)
        clipped = np.column_stack([
            np.clip(flat[:, k], v.axes[k][0], v.axes[k][-1])
            for k in range(len(v.axes))])
        out = v._interp(clipped)
    else:
        raise ModelError(f"unknown drift kind {v.kind!r}")
    out = out.reshape(pts.shape)
    return out[0] if single and out.ndim > pts.ndim else out


def drift_from_config(spec: dict, model: IbfModel) -> DriftField:
    """Build a drift from its config dictionary form."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "none":
        extra = spec
        drift = drift_none()
    elif kind == "linear":
        drift = drift_linear(spec.pop("matrix"))
        extra = spec
    elif kind == "radial_rkhs":
        drift = drift_radial_rkhs(
            model, rho=float(spec.pop("rho")), scale=float(spec.pop("scale", 1.0)),
            resolution=spec.pop("resolution", None))
        extra = spec
    elif kind == "custom_table":
        drift = drift_custom_table(spec.pop("axes"), spec.pop("values"))
        extra = spec
    else:
        raise ModelError(f"drift kind must be one of {DRIFT_KINDS}, got {kind!r}")
    if extra:
        raise ModelError(f"unknown drift fields: {sorted(extra)}")
    return drift


# ---------------------------------------------------------------------------
# covariance assembly and sampling

def covariance_matrix(model: IbfModel, points) -> np.ndarray:
    """Dense (N d) x (N d) block covariance C[i][j] = b(x_i - x_j)."""
    pos = _positions(points)
    return covariance_matrix_batch(model, pos[None, :, :])[0]


def covariance_matrix_batch(model: IbfModel, positions: np.ndarray) -> np.ndarray:
    """Batched assembly for positions of shape (B, N, d) -> (B, Nd, Nd).

    Fills the interleaved matrix by component slices; entries match
    tensor_field bitwise (same operation order), without materializing
    the five-dimensional block array.
    """
    from .covariance import covariance_scalars

    pos = np.asarray(positions, dtype=float)
    nb, n, d = pos.shape
    diffs = pos[:, :, None, :] - pos[:, None, :, :]
    s = np.linalg.norm(diffs, axis=-1)
    b_l, b_n = covariance_scalars(model, s)
    s2 = s * s
    coef = np.divide(b_l - b_n, s2, out=np.zeros_like(s2), where=s2 > 0.0)
    out = np.empty((nb, n * d, n * d))
    for a in range(d):
        for c in range(d):
            block = coef * (diffs[..., a] * diffs[..., c])
            if a == c:
                block = block + b_n
            out[:, a::d, c::d] = block
    return out


def _closest_pair(pos: np.ndarray) -> tuple[tuple[int, int], float]:
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return (int(i), int(j)), float(dist[i, j])


def cholesky_with_jitter(cov: np.ndarray, n_points: int) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(cov), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(cov.shape[0])
    jitter = JITTER_BASE * n_points
    while jitter <= JITTER_CAP:
        try:
            return np.linalg.cholesky(cov + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError("not positive definite at maximal jitter")


def factor_covariance(model: IbfModel, points) -> tuple[np.ndarray, float]:
    pos = _positions(points)
    try:
        return cholesky_with_jitter(covariance_matrix(model, pos), pos.shape[0])
    except np.linalg.LinAlgError:
        pair, dist = _closest_pair(pos)
        raise DegenerateCloudError(pair, dist) from None


def cholesky_with_jitter_batch(
        covs: np.ndarray, n_points: int, positions: np.ndarray | None = None,
        path_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Batched factorization; falls back to per-matrix jitter on failure.

    path_offset translates the in-batch index to the experiment's path
    index in error reports.
    """
    try:
        return np.linalg.cholesky(covs), np.zeros(covs.shape[0])
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(covs)
    jit = np.zeros(covs.shape[0])
    for k in range(covs.shape[0]):
        try:
            out[k], jit[k] = cholesky_with_jitter(covs[k], n_points)
        except np.linalg.LinAlgError:
            if positions is not None:
                pair, dist = _closest_pair(positions[k])
                raise DegenerateCloudError(pair, dist,
                                           path_index=path_offset + k) from None
            raise
    return out, jit


@dataclass(eq=False)
class IncrementSampler:
    """Frozen factorization of the increment covariance on a point set."""

    model: IbfModel
    positions: np.ndarray
    chol: np.ndarray
    jitter_used: float


def build_sampler(model: IbfModel, points) -> IncrementSampler:
    """Assemble and factor the block covariance of the generating field."""
    pos = _positions(points)
    if pos.shape[0] < 1:
        raise ValueError("need at least one point")
    if pos.shape[1] != model.d:
        raise ModelError(f"points must have dimension d = {model.d}")
    chol, jitter = factor_covariance(model, pos)
    return IncrementSampler(model=model, positions=pos.copy(), chol=chol,
                            jitter_used=jitter)


def sample_increment(sampler: IncrementSampler, dt: float,
                     rng: np.random.Generator) -> np.ndarray:
    """One joint spatial increment over a step of length dt: sqrt(dt) L z."""
    if not (dt > 0.0):
        raise ValueError("dt must be > 0")
    n, d = sampler.positions.shape
    z = rng.standard_normal(n * d)
    return (math.sqrt(dt) * (sampler.chol @ z)).reshape(n, d)
