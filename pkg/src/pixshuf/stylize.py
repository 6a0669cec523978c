"""End-to-end stylization: rearrange the style image's pixels to match the content.

The style image is resized onto the content grid, a displacement field is
optimized coarse-to-fine to maximise mutual information with the content, and
the output is the style image warped by that field.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import asdict, dataclass, field as dc_field, fields, replace
from typing import Optional

import numpy as np

from .errors import DimensionError
from .image import Image, resize_bilinear, to_luma
from .metrics import color_hist_chi2, ssim_luma
from .mi import HistogramConfig
from .optimizer import LevelSchedule, PyramidResult, evaluate, run_pyramid
from .warp import DisplacementField, SamplingMode, warp

REPORT_KEYS = ("mi_initial", "mi_final", "content_ssim", "style_hist_chi2", "wall_time_ms", "levels_run")


class MIChannels(enum.Enum):
    LUMA = "luma"
    SUM = "sum"  # MI summed over the R, G and B channel pairs

    @classmethod
    def parse(cls, value) -> "MIChannels":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("perchannelsum", "per_channel_sum"):
            v = "sum"
        try:
            return cls(v)
        except ValueError:
            raise ValueError(f"unknown mi_channels {value!r}; expected luma or sum") from None


@dataclass(frozen=True)
class StylizeConfig:
    hist: HistogramConfig = dc_field(default_factory=HistogramConfig)
    sched: LevelSchedule = dc_field(default_factory=LevelSchedule)
    final_sampling: SamplingMode = SamplingMode.BILINEAR
    mi_channels: MIChannels = MIChannels.LUMA
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "final_sampling", SamplingMode.parse(self.final_sampling))
        object.__setattr__(self, "mi_channels", MIChannels.parse(self.mi_channels))

    @classmethod
    def from_dict(cls, d: dict) -> "StylizeConfig":
        """Build from a nested dict mirroring the dataclass (as read from JSON)."""
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        if "hist" in kw:
            kw["hist"] = _sub(HistogramConfig, kw["hist"], "hist")
        if "sched" in kw:
            sched = dict(kw["sched"])
            if "levels" in sched and "iters_per_level" not in sched:
                sched["iters_per_level"] = (200,) * int(sched["levels"])
            kw["sched"] = _sub(LevelSchedule, sched, "sched")
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_sampling"] = self.final_sampling.value
        d["mi_channels"] = self.mi_channels.value
        d["sched"]["iters_per_level"] = list(self.sched.iters_per_level)
        return d


def _sub(cls, d, name):
    if not isinstance(d, dict):
        raise ValueError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**d)


@dataclass
class StylizeReport:
    mi_initial: float
    mi_final: float
    content_ssim: float
    style_hist_chi2: float
    wall_time_ms: float
    levels_run: int

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in REPORT_KEYS})


@dataclass
class StylizeResult:
    output: Image
    field: DisplacementField
    report: StylizeReport
    pyramid: PyramidResult

    def __iter__(self):
        return iter((self.output, self.field, self.report))


def objective_images(content: Image, style: Image, mi_channels) -> tuple[Image, Image]:
    """The image pair MI is measured on: luma planes, or matching RGB stacks."""
    if MIChannels.parse(mi_channels) is MIChannels.LUMA:
        return to_luma(content), to_luma(style)
    c, s = content, style
    if c.channels == 1:
        c = Image(np.repeat(c.data, 3, axis=2))
    if s.channels == 1:
        s = Image(np.repeat(s.data, 3, axis=2))
    return c, s


def stylize(content: Image, style: Image, cfg: StylizeConfig = StylizeConfig(),
            init_field: Optional[DisplacementField] = None) -> StylizeResult:
    """Warp ``style`` so that it shares as much information as possible with ``content``.

    The output always has the content's dimensions. ``mi_final`` is the MI of
    the optimized (bilinear) warp, whatever ``final_sampling`` renders.
    """
    start = time.perf_counter()
    resized = resize_bilinear(style, content.width, content.height)
    c_obj, s_obj = objective_images(content, resized, cfg.mi_channels)
    if init_field is not None and (init_field.width, init_field.height) != (content.width, content.height):
        raise DimensionError(
            f"initial field is {init_field.width}x{init_field.height}, content {content.width}x{content.height}"
        )
    start_field = init_field or DisplacementField.zeros(content.width, content.height)
    mi_initial = evaluate(c_obj, s_obj, start_field, cfg.hist)[0]

    pyr = run_pyramid(c_obj, s_obj, cfg.sched, cfg.hist, init_field=init_field)
    out = warp(resized, pyr.field, cfg.final_sampling)
    mi_final = evaluate(c_obj, s_obj, pyr.field, cfg.hist)[0]

    report = StylizeReport(
        mi_initial=mi_initial,
        mi_final=mi_final,
        content_ssim=ssim_luma(out, content),
        style_hist_chi2=color_hist_chi2(out, style),
        wall_time_ms=(time.perf_counter() - start) * 1000.0,
        levels_run=pyr.levels_run,
    )
    return StylizeResult(out, pyr.field, report, pyr)


def with_overrides(cfg: StylizeConfig, **kw) -> StylizeConfig:
    """Return ``cfg`` with top-level or nested (``hist__bins=...``) fields replaced."""
    top, hist, sched = {}, {}, {}
    for k, v in kw.items():
        if k.startswith("hist__"):
            hist[k[6:]] = v
        elif k.startswith("sched__"):
            sched[k[7:]] = v
        else:
            top[k] = v
    if hist:
        top["hist"] = replace(cfg.hist, **hist)
    if sched:
        top["sched"] = replace(cfg.sched, **sched)
    return replace(cfg, **top)
