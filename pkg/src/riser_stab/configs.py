"""Domain types, closed-form field descriptors, and scenario validation.

Scenarios are resolution-independent: initial data and the tension profile
are stored as small descriptor dicts and sampled onto whatever grid a run
uses.  Raw arrays are accepted too (mainly for tracking references and
restarts) and are validated rather than trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .operators import Grid, VolumePartition

__all__ = [
    "MODES",
    "DescriptorError",
    "RiserParams",
    "ControlConfig",
    "State",
    "ScenarioConfig",
    "ValidationReport",
    "sample_field",
    "tension_profile",
    "source_functions",
    "validate_scenario",
    "load_scenario",
]

MODES = ("nonlinear-damping", "linear-damping", "source-term", "tracking")

# descriptor types whose samples are forced to satisfy the clamped boundary
# values exactly (set, not approximated)
_CLAMPED_TYPES = {"zero", "sine", "bump"}


class DescriptorError(ValueError):
    """A closed-form descriptor could not be parsed or evaluated."""


def _require(desc: dict, key: str, what: str):
    if key not in desc:
        raise DescriptorError(f"{what} descriptor of type '{desc.get('type')}' needs '{key}'")
    return desc[key]


def sample_field(descriptor: dict, grid: Grid) -> np.ndarray:
    """Evaluate an initial-data descriptor on the grid nodes.

    Supported types: ``zero``; ``sine`` (single harmonic or a ``terms`` list
    of ``[harmonic, amplitude]`` pairs of sin(n pi x / L)); ``bump`` for
    ``scale * x^2 (L-x)^2``; ``polynomial`` with ascending ``coefficients``;
    ``array`` with explicit nodal ``values``; ``file`` loading one array from
    an ``.npz`` state dump.  Clamped closed forms get exact zero endpoints.
    """
    if not isinstance(descriptor, dict) or "type" not in descriptor:
        raise DescriptorError("descriptor must be a dict with a 'type' tag")
    kind = descriptor["type"]
    x = grid.nodes()
    L = grid.length
    if kind == "zero":
        out = np.zeros(grid.n_points)
    elif kind == "sine":
        if "terms" in descriptor:
            terms = descriptor["terms"]
        else:
            terms = [[_require(descriptor, "harmonic", "field"), _require(descriptor, "amplitude", "field")]]
        out = np.zeros(grid.n_points)
        for n, amp in terms:
            if int(n) < 1:
                raise DescriptorError("sine harmonic must be a positive integer")
            out += float(amp) * np.sin(int(n) * np.pi * x / L)
    elif kind == "bump":
        scale = float(descriptor.get("scale", 1.0))
        out = scale * x**2 * (L - x) ** 2
    elif kind == "polynomial":
        coeffs = np.asarray(_require(descriptor, "coefficients", "field"), dtype=float)
        out = np.polynomial.polynomial.polyval(x, coeffs)
    elif kind == "array":
        out = np.asarray(_require(descriptor, "values", "field"), dtype=float)
        if len(out) != grid.n_points:
            raise DescriptorError(
                f"array descriptor has {len(out)} values for a {grid.n_points}-node grid"
            )
        out = out.copy()
    elif kind == "file":
        path = _require(descriptor, "path", "field")
        key = descriptor.get("key", "u")
        with np.load(path) as data:
            if key not in data:
                raise DescriptorError(f"file descriptor: '{key}' not found in {path}")
            out = np.asarray(data[key], dtype=float)
        if out.ndim == 2:  # snapshot stack: take the last one
            out = out[-1]
        if len(out) != grid.n_points:
            raise DescriptorError(
                f"file descriptor has {len(out)} values for a {grid.n_points}-node grid"
            )
    else:
        raise DescriptorError(f"unknown descriptor type '{kind}'")
    if kind in _CLAMPED_TYPES:
        out[0] = 0.0
        out[-1] = 0.0
    return out


def tension_profile(descriptor: dict, x: np.ndarray, length: float) -> np.ndarray:
    """Evaluate a tension descriptor at arbitrary points.

    Built-in profiles: ``constant`` (value), ``linear`` (a(x) = offset +
    slope*x), ``cosine`` (base + amplitude*cos(harmonic*pi*x/L)).
    """
    if not isinstance(descriptor, dict) or "type" not in descriptor:
        raise DescriptorError("tension descriptor must be a dict with a 'type' tag")
    kind = descriptor["type"]
    x = np.asarray(x, dtype=float)
    if kind == "constant":
        return np.full_like(x, float(_require(descriptor, "value", "tension")))
    if kind == "linear":
        return float(_require(descriptor, "offset", "tension")) + float(
            _require(descriptor, "slope", "tension")
        ) * x
    if kind == "cosine":
        base = float(_require(descriptor, "base", "tension"))
        amp = float(_require(descriptor, "amplitude", "tension"))
        n = int(descriptor.get("harmonic", 1))
        return base + amp * np.cos(n * np.pi * x / length)
    raise DescriptorError(f"unknown tension descriptor type '{kind}'")


def source_functions(descriptor: dict) -> tuple[Callable, Callable]:
    """Return (f, F) for a nonlinear source descriptor, F the antiderivative.

    ``odd_power`` gives f(s) = c * s * |s|^(q-1) with q >= 1, whose
    antiderivative F(s) = c |s|^(q+1) / (q+1) is nonnegative for c >= 0,
    as is f(s)s - F(s); ``cubic`` is shorthand for q = 3.
    """
    if not isinstance(descriptor, dict) or "type" not in descriptor:
        raise DescriptorError("source descriptor must be a dict with a 'type' tag")
    kind = descriptor["type"]
    if kind == "cubic":
        c = float(descriptor.get("coefficient", 1.0))
        q = 3.0
    elif kind == "odd_power":
        c = float(descriptor.get("coefficient", 1.0))
        q = float(_require(descriptor, "power", "source"))
        if q < 1:
            raise DescriptorError("source power must be >= 1")
    else:
        raise DescriptorError(f"unknown source descriptor type '{kind}'")

    def f(s):
        s = np.asarray(s, dtype=float)
        return c * s * np.abs(s) ** (q - 1.0)

    def F(s):
        s = np.asarray(s, dtype=float)
        return c * np.abs(s) ** (q + 1.0) / (q + 1.0)

    return f, F


@dataclass(frozen=True)
class RiserParams:
    """Physical coefficients and the effective-tension profile with its bounds."""

    m: float = 1.0          # mass line density, > 0
    k: float = 1.0          # flexural rigidity, > 0
    b: float = 1.0          # damping coefficient, >= 0
    gamma: float = 0.0      # gyroscopic (internal flow) parameter
    p: float = 1.0          # damping exponent, >= 1 in nonlinear mode
    L: float = np.pi        # domain length, > 0
    a0: float = 0.0         # lower tension bound magnitude: a(x) >= -a0
    a1: float = 1.0         # upper tension bound: a(x) <= a1
    tension: dict = field(default_factory=lambda: {"type": "constant", "value": 0.0})

    def tension_on_nodes(self, grid: Grid) -> np.ndarray:
        return tension_profile(self.tension, grid.nodes(), self.L)

    def tension_on_midpoints(self, grid: Grid) -> np.ndarray:
        return tension_profile(self.tension, grid.midpoints(), self.L)


@dataclass(frozen=True)
class ControlConfig:
    """Observable count, nudging gain, and the derived volume width h = L/N."""

    n_volumes: int
    mu: float
    length: float

    @property
    def h(self) -> float:
        return self.length / self.n_volumes

    def partition(self) -> VolumePartition:
        return VolumePartition(self.n_volumes, self.length)


@dataclass(frozen=True)
class State:
    """Displacement and velocity fields at one time level."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-d arrays of equal length")
        for name, f in (("u", u), ("v", v)):
            if f[0] != 0.0 or f[-1] != 0.0:
                raise ValueError(f"{name} must vanish exactly at both boundary nodes")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one closed-loop run needs, resolution included."""

    params: RiserParams
    control: ControlConfig
    grid_points: int
    dt: float
    t_final: float
    initial_u: dict
    initial_v: dict = field(default_factory=lambda: {"type": "zero"})
    mode: str = "linear-damping"
    source: Optional[dict] = None
    reference_initial: Optional[dict] = None  # {"u": desc, "v": desc}, tracking only
    sample_every: int = 1
    snapshot_every: int = 0
    fit_window: Optional[tuple[float, float]] = None
    delta_override: Optional[float] = None  # off-theorem exploration knob

    def grid(self) -> Grid:
        return Grid(self.grid_points, self.params.L)

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "params": {
                "m": self.params.m,
                "k": self.params.k,
                "b": self.params.b,
                "gamma": self.params.gamma,
                "p": self.params.p,
                "L": self.params.L,
                "a0": self.params.a0,
                "a1": self.params.a1,
                "tension": self.params.tension,
            },
            "control": {"n_volumes": self.control.n_volumes, "mu": self.control.mu},
            "grid_points": self.grid_points,
            "dt": self.dt,
            "t_final": self.t_final,
            "initial_u": self.initial_u,
            "initial_v": self.initial_v,
            "sample_every": self.sample_every,
            "snapshot_every": self.snapshot_every,
        }
        if self.source is not None:
            d["source"] = self.source
        if self.reference_initial is not None:
            d["reference_initial"] = self.reference_initial
        if self.fit_window is not None:
            d["fit_window"] = list(self.fit_window)
        if self.delta_override is not None:
            d["delta_override"] = self.delta_override
        return d


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str):
        self.violations.append(msg)


def load_scenario(source) -> ScenarioConfig:
    """Build a ScenarioConfig from a dict, a JSON string, or a file path."""
    if isinstance(source, ScenarioConfig):
        return source
    if isinstance(source, dict):
        raw = source
    else:
        text = None
        s = str(source)
        if s.lstrip().startswith("{"):
            text = s
        else:
            with open(s, "r", encoding="utf-8") as fh:
                text = fh.read()
        raw = json.loads(text)
    p = raw.get("params", {})
    params = RiserParams(
        m=float(p.get("m", 1.0)),
        k=float(p.get("k", 1.0)),
        b=float(p.get("b", 1.0)),
        gamma=float(p.get("gamma", 0.0)),
        p=float(p.get("p", 1.0)),
        L=float(p.get("L", np.pi)),
        a0=float(p.get("a0", 0.0)),
        a1=float(p.get("a1", 1.0)),
        tension=p.get("tension", {"type": "constant", "value": 0.0}),
    )
    c = raw.get("control", {})
    control = ControlConfig(
        n_volumes=int(c.get("n_volumes", 1)),
        mu=float(c.get("mu", 0.0)),
        length=params.L,
    )
    window = raw.get("fit_window")
    return ScenarioConfig(
        params=params,
        control=control,
        grid_points=int(raw.get("grid_points", 101)),
        dt=float(raw.get("dt", 1e-3)),
        t_final=float(raw.get("t_final", 1.0)),
        initial_u=raw.get("initial_u", {"type": "zero"}),
        initial_v=raw.get("initial_v", {"type": "zero"}),
        mode=raw.get("mode", "linear-damping"),
        source=raw.get("source"),
        reference_initial=raw.get("reference_initial"),
        sample_every=int(raw.get("sample_every", 1)),
        snapshot_every=int(raw.get("snapshot_every", 0)),
        fit_window=tuple(window) if window else None,
        delta_override=raw.get("delta_override"),
    )


def _check_field_descriptor(report, cfg, name, descriptor, grid):
    try:
        f = sample_field(descriptor, grid)
    except DescriptorError as err:
        report.add(f"{name}: {err}")
        return
    if f[0] != 0.0 or f[-1] != 0.0:
        report.add(f"{name}: field must vanish at both boundary nodes")


def validate_scenario(cfg: ScenarioConfig) -> ValidationReport:
    """Collect every violated invariant; empty report means the scenario is runnable.

    Pure: the config is never mutated and repeated calls return identical
    reports.
    """
    report = ValidationReport()
    p = cfg.params
    if p.m <= 0:
        report.add("m > 0")
    if p.k <= 0:
        report.add("k > 0")
    if p.L <= 0:
        report.add("L > 0")
    if p.b < 0:
        report.add("b >= 0")
    if p.a0 < 0:
        report.add("a0 >= 0")
    if p.a1 <= 0:
        report.add("a1 > 0")
    if cfg.mode not in MODES:
        report.add(f"mode must be one of {MODES}")
    if cfg.mode == "nonlinear-damping" and p.p < 1:
        report.add("p >= 1 in nonlinear damping mode")
    if cfg.control.n_volumes < 1:
        report.add("n_volumes >= 1")
    if cfg.control.mu < 0:
        report.add("mu >= 0")
    if abs(cfg.control.h * cfg.control.n_volumes - p.L) > 1e-12 * max(p.L, 1.0):
        report.add("h * N must equal L")
    if cfg.grid_points < 7:
        report.add("grid_points >= 7 (minimum stencil support)")
    if cfg.dt <= 0:
        report.add("dt > 0")
    if cfg.t_final <= cfg.dt:
        report.add("t_final > dt")
    if cfg.sample_every < 1:
        report.add("sample_every >= 1")

    if report.violations and (p.L <= 0 or cfg.grid_points < 7):
        return report  # cannot sample anything on a degenerate grid

    grid = cfg.grid()
    if cfg.control.n_volumes > cfg.grid_points - 1:
        report.add("volumes finer than grid (N <= M-1)")

    # tension bounds at nodes and at the midpoints the flux operator uses
    try:
        for where, a in (
            ("nodes", p.tension_on_nodes(grid)),
            ("midpoints", p.tension_on_midpoints(grid)),
        ):
            if np.any(a < -p.a0 - 1e-12 * max(p.a0, 1.0)):
                report.add(f"tension below -a0 on grid {where}")
            if np.any(a > p.a1 + 1e-12 * max(p.a1, 1.0)):
                report.add(f"tension above a1 on grid {where}")
    except DescriptorError as err:
        report.add(f"tension: {err}")

    _check_field_descriptor(report, cfg, "initial_u", cfg.initial_u, grid)
    _check_field_descriptor(report, cfg, "initial_v", cfg.initial_v, grid)

    if cfg.mode == "source-term":
        if cfg.source is None:
            report.add("source-term mode requires a source descriptor")
        else:
            try:
                f, F = source_functions(cfg.source)
            except DescriptorError as err:
                report.add(f"source: {err}")
            else:
                # numeric spot-checks of the admissibility conditions
                s = np.linspace(-10.0, 10.0, 81)
                if abs(float(f(0.0))) > 0.0:
                    report.add("source: f(0) = 0 violated")
                if np.any(F(s) < -1e-12):
                    report.add("source: F(s) >= 0 violated on sample grid")
                if np.any(f(s) * s - F(s) < -1e-12):
                    report.add("source: f(s)s - F(s) >= 0 violated on sample grid")
    elif cfg.source is not None:
        report.add(f"source descriptor given but mode is '{cfg.mode}'")

    if cfg.mode == "tracking":
        if cfg.reference_initial is None:
            report.add("tracking mode requires reference_initial")
        else:
            ref = cfg.reference_initial
            _check_field_descriptor(
                report, cfg, "reference_initial.u", ref.get("u", {"type": "zero"}), grid
            )
            _check_field_descriptor(
                report, cfg, "reference_initial.v", ref.get("v", {"type": "zero"}), grid
            )
    elif cfg.reference_initial is not None:
        report.add(f"reference_initial given but mode is '{cfg.mode}'")

    return report


def with_updates(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Functional update helper used by the sweep machinery."""
    return replace(cfg, **changes)
