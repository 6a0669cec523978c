"""Adam optimization of a displacement field against a mutual-information objective.

The objective at a pyramid level is ``-MI(content, warp(style, field)) + smoothness``.
Adam does not move raw pixel offsets: one parameter unit spans half the image
extent along each axis (the align-corners normalized-grid convention), which is
what lets a learning rate of a few 1e-3 cross several pixels in a few hundred
steps. Inside a pyramid the unit is fixed by the finest level and counted in
pixels of the level being optimized, so coarse levels take proportionally
larger physical steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError
from .image import Image, build_pyramid, max_pyramid_levels
from .mi import HistogramConfig, MIObjective
from .warp import DisplacementField, resample_field, upsample_field, warp_and_gradient

log = logging.getLogger(__name__)

MIN_LEVEL_SIZE = 8
MI_IMPROVEMENT = 1e-6


@dataclass(frozen=True)
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    @classmethod
    def fresh(cls, size: int, **hyper) -> "OptimizerState":
        return cls(np.zeros(size), np.zeros(size), 0, **hyper)


def adam_step(params, grads, state: OptimizerState):
    """One bias-corrected Adam descent step. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape or state.v.shape != params.shape:
        raise DimensionError(
            f"params {params.shape}, grads {grads.shape}, moments {state.m.shape}/{state.v.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    with np.errstate(divide="ignore", invalid="ignore"):
        new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.adam_eps)
    return new, replace(state, m=m, v=v, t=t)


@dataclass(frozen=True)
class LevelSchedule:
    """Coarse-to-fine schedule. ``iters_per_level`` runs coarsest first."""

    levels: int = 4
    iters_per_level: Sequence[int] = (200, 200, 200, 200)
    smooth_weight: float = 0.05
    early_stop_patience: int = 50
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    parameterization: str = "dense"  # or "grid": control points every grid_spacing px
    grid_spacing: int = 8

    def __post_init__(self):
        iters = tuple(int(n) for n in self.iters_per_level)
        object.__setattr__(self, "iters_per_level", iters)
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if len(iters) != self.levels:
            raise ValueError(f"iters_per_level has {len(iters)} entries for {self.levels} levels")
        if any(n < 0 for n in iters):
            raise ValueError("iteration budgets must be >= 0")
        if self.smooth_weight < 0:
            raise ValueError("smooth_weight must be >= 0")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.parameterization not in ("dense", "grid"):
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        if self.grid_spacing < 1:
            raise ValueError("grid_spacing must be >= 1")

    @classmethod
    def uniform(cls, levels: int, iters: int, **kw) -> "LevelSchedule":
        return cls(levels=levels, iters_per_level=(iters,) * levels, **kw)


class TraceEntry(NamedTuple):
    iteration: int
    objective: float
    mi: float
    smooth: float


@dataclass
class PyramidResult:
    field: DisplacementField
    traces: list  # one list of TraceEntry per level run, coarsest first
    levels_run: int
    level_sizes: list = dc_field(default_factory=list)  # (w, h) per level, coarsest first

    @property
    def evaluations(self) -> int:
        return sum(len(t) for t in self.traces)


def smoothness_penalty(field: DisplacementField, weight: float):
    """Squared forward-difference penalty, normalised by pixel count.

    Returns ``(value, (grad_dx, grad_dy))``.
    """
    n = field.dx.size
    grads = []
    value = 0.0
    for u in (field.dx, field.dy):
        g = np.zeros_like(u)
        if weight == 0:
            grads.append(g)
            continue
        dh = u[:, 1:] - u[:, :-1]
        dv = u[1:, :] - u[:-1, :]
        value += float(np.sum(dh * dh) + np.sum(dv * dv))
        g[:, 1:] += 2.0 * dh
        g[:, :-1] -= 2.0 * dh
        g[1:, :] += 2.0 * dv
        g[:-1, :] -= 2.0 * dv
        grads.append(g * (weight / n))
    return weight * value / n, (grads[0], grads[1])


def half_extent(width: int, height: int):
    """Pixels per normalized unit along x and y."""
    return max(width - 1, 1) / 2.0, max(height - 1, 1) / 2.0


def _interp_matrix(coarse: int, fine: int) -> np.ndarray:
    """``(fine, coarse)`` align-corners linear interpolation weights."""
    r = np.zeros((fine, coarse))
    if coarse == 1:
        r[:, 0] = 1.0
        return r
    pos = np.arange(fine) * (coarse - 1) / max(fine - 1, 1)
    i0 = np.minimum(np.floor(pos).astype(np.intp), coarse - 1)
    i1 = np.minimum(i0 + 1, coarse - 1)
    f = pos - i0
    rows = np.arange(fine)
    np.add.at(r, (rows, i0), 1.0 - f)
    np.add.at(r, (rows, i1), f)
    return r


class _Parameterization:
    """Maps the Adam parameter vector (normalized units) to pixel offsets and back."""

    def __init__(self, width: int, height: int, kind: str, spacing: int, unit=None):
        if unit is None:
            unit = half_extent(width, height)
        self.scale_x, self.scale_y = unit
        self.kind = kind
        if kind == "grid":
            gw = max(2, -(-width // spacing) + 1)
            gh = max(2, -(-height // spacing) + 1)
            self.rx = _interp_matrix(gw, width)
            self.ry = _interp_matrix(gh, height)
            self.param_shape = (gh, gw)
        else:
            self.param_shape = (height, width)
        self.size = 2 * self.param_shape[0] * self.param_shape[1]

    def _expand(self, p):
        return self.ry @ p @ self.rx.T if self.kind == "grid" else p

    def _reduce(self, g):
        return self.ry.T @ g @ self.rx if self.kind == "grid" else g

    def offsets(self, theta):
        px, py = theta.reshape(2, *self.param_shape)
        return self._expand(px) * self.scale_x, self._expand(py) * self.scale_y

    def pullback(self, gdx, gdy):
        return np.concatenate(
            [(self._reduce(gdx) * self.scale_x).ravel(), (self._reduce(gdy) * self.scale_y).ravel()]
        )


def evaluate(content: Image, style: Image, field: DisplacementField, hist: HistogramConfig,
             smooth_weight: float = 0.0, objectives=None):
    """Objective terms and field gradient at ``field``.

    MI is summed over channels (pass 1-channel images for luma-only MI).
    Returns ``(mi, smooth, grad_dx, grad_dy)`` where the gradients belong to
    ``-mi + smooth``.
    """
    if content.shape != style.shape:
        raise DimensionError(f"content {content.shape} and style {style.shape} differ")
    if objectives is None:
        objectives = [MIObjective(content.plane(c), hist) for c in range(content.channels)]
    warped, gx, gy = warp_and_gradient(style, field)
    mi = 0.0
    gdx = np.zeros(field.dx.shape)
    gdy = np.zeros(field.dy.shape)
    for c, obj in enumerate(objectives):
        val, gb = obj.value_and_grad(warped[:, :, c])
        mi += val
        gdx -= gb * gx[:, :, c]
        gdy -= gb * gy[:, :, c]
    smooth, (sgx, sgy) = smoothness_penalty(field, smooth_weight)
    return mi, smooth, gdx + sgx, gdy + sgy


def optimize_level(
    content: Image,
    style: Image,
    init_field: DisplacementField,
    hist: HistogramConfig = HistogramConfig(),
    iters: int = 200,
    schedule: LevelSchedule = LevelSchedule(),
    callback: Optional[Callable[[int, DisplacementField], bool]] = None,
    level: Optional[int] = None,
    step_unit=None,
):
    """Refine ``init_field`` at one resolution.

    Returns ``(field, trace)``: the lowest-objective field visited and one
    :class:`TraceEntry` per objective evaluation. ``callback(iteration, field)``
    runs after each evaluation; a truthy return stops the level. ``step_unit``
    is the ``(x, y)`` pixel size of one parameter unit (default: half extent).
    """
    if content.shape != style.shape:
        raise DimensionError(f"content {content.shape} and style {style.shape} differ")
    if (init_field.width, init_field.height) != (content.width, content.height):
        raise DimensionError(
            f"init field {init_field.width}x{init_field.height} vs image {content.width}x{content.height}"
        )
    trace: list[TraceEntry] = []
    if iters <= 0:
        return init_field, trace

    param = _Parameterization(
        content.width, content.height, schedule.parameterization, schedule.grid_spacing, step_unit
    )
    state = OptimizerState.fresh(
        param.size, lr=schedule.lr, beta1=schedule.beta1, beta2=schedule.beta2, adam_eps=schedule.adam_eps
    )
    objectives = [MIObjective(content.plane(c), hist) for c in range(content.channels)]
    theta = np.zeros(param.size)
    field = init_field
    best_field, best_obj = init_field, np.inf
    best_mi, stale = -np.inf, 0

    for it in range(iters):
        mi, smooth, gdx, gdy = evaluate(content, style, field, hist, schedule.smooth_weight, objectives)
        objective = -mi + smooth
        if not (np.isfinite(objective) and np.all(np.isfinite(gdx)) and np.all(np.isfinite(gdy))):
            raise NonFiniteError(f"non-finite objective or gradient at iteration {it}", iteration=it, level=level)
        trace.append(TraceEntry(it, objective, mi, smooth))
        if objective < best_obj:
            best_obj, best_field = objective, field
        if mi > best_mi + MI_IMPROVEMENT:
            best_mi, stale = mi, 0
        else:
            stale += 1
        if callback is not None and callback(it, field):
            break
        if stale >= schedule.early_stop_patience:
            log.debug("level %s: early stop at iteration %d", level, it)
            break
        if it == iters - 1:
            break
        theta, state = adam_step(theta, param.pullback(gdx, gdy), state)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteError(f"non-finite parameters after Adam step at iteration {it}", iteration=it, level=level)
        ox, oy = param.offsets(theta)
        field = DisplacementField(init_field.dx + ox, init_field.dy + oy)

    return best_field, trace


def run_pyramid(
    content: Image,
    style: Image,
    schedule: LevelSchedule = LevelSchedule(),
    hist: HistogramConfig = HistogramConfig(),
    init_field: Optional[DisplacementField] = None,
    callback: Optional[Callable[[int, int, DisplacementField], bool]] = None,
) -> PyramidResult:
    """Coarse-to-fine optimization; returns the full-resolution field.

    If the requested depth would shrink a side below 8 px the coarsest levels
    are dropped (their budgets with them). ``callback(level, iteration, field)``
    is forwarded to every level, level 0 being the coarsest run. The result
    never has a higher objective than the full-resolution starting field.
    """
    if content.shape != style.shape:
        raise DimensionError(f"content {content.shape} and style {style.shape} differ")
    levels = min(schedule.levels, max_pyramid_levels(content.width, content.height, MIN_LEVEL_SIZE))
    if levels < schedule.levels:
        log.info("clamping pyramid from %d to %d levels (min side %d px)", schedule.levels, levels, MIN_LEVEL_SIZE)
    budgets = schedule.iters_per_level[schedule.levels - levels:]
    c_pyr = build_pyramid(content, levels)[::-1]
    s_pyr = build_pyramid(style, levels)[::-1]

    c0 = c_pyr[0]
    if init_field is None:
        field = DisplacementField.zeros(c0.width, c0.height)
    else:
        field = resample_field(init_field, c0.width, c0.height)

    unit = half_extent(content.width, content.height)
    traces, sizes = [], []
    for lvl, (c, s, n) in enumerate(zip(c_pyr, s_pyr, budgets)):
        if (field.width, field.height) != (c.width, c.height):
            field = upsample_field(field, c.width, c.height)
        cb = None if callback is None else (lambda it, f, _l=lvl: callback(_l, it, f))
        field, trace = optimize_level(c, s, field, hist, n, schedule, cb, level=lvl, step_unit=unit)
        traces.append(trace)
        sizes.append((c.width, c.height))
        if trace:
            log.info("level %d (%dx%d): %d iters, MI %.4f -> %.4f", lvl, c.width, c.height,
                     len(trace), trace[0].mi, trace[-1].mi)
    if levels > 1 and any(traces):
        # coarse levels never visit the full-resolution start, so keep it if it still wins
        start = init_field if init_field is not None else DisplacementField.zeros(content.width, content.height)
        mi0, sm0, _, _ = evaluate(content, style, start, hist, schedule.smooth_weight)
        mi1, sm1, _, _ = evaluate(content, style, field, hist, schedule.smooth_weight)
        if -mi0 + sm0 < -mi1 + sm1:
            log.info("pyramid result (objective %.6f) is worse than its start (%.6f); keeping the start",
                     -mi1 + sm1, -mi0 + sm0)
            field = start
    return PyramidResult(field, traces, levels, sizes)
