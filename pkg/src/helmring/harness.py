"""Experiment registry, end-to-end runs, error metrics and convergence studies.

Named presets mirror the published experiment settings (potential, mode
index, bandlimit, frequency count, spatial step).  The annulus is [1, 3]
for every preset: the test potentials are centered at r = 2 with support
inside [1.5, 2.5] (or C^2-matched zeros exactly at 1 and 3 for the cosine
family), and q(a) = q(b) = 0 is verified numerically at build time.  This
geometry is inferred from the potential formulas, not read from a table.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BudgetExceededError, DomainError
from .forward import (ImpedanceData, RadialPotential, cosine_potential,
                      gaussian_bump, generate_data, square_well, zero_potential)
from .inversion import ReconstructionConfig, ReconstructionResult, reconstruct
from .quadrature import (FrequencyGrid, accelerated_grid, richardson_combine,
                         trapezoid_grid)

GRID_KINDS = ("trapezoid", "accelerated")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one forward+inverse experiment."""

    name: str
    potential: RadialPotential
    n: int = 0
    omega: float = 160.0
    n_freq: int = 270
    h: float = 1.0 / 20000
    scheme: str = "heun-cn"
    richardson_levels: int = 1
    richardson_ratio: float = 2.0
    grid_kind: str = "trapezoid"
    accel_params: dict = field(default_factory=dict)
    forward_steps: int | None = None

    @property
    def a(self) -> float:
        return self.potential.a

    @property
    def b(self) -> float:
        return self.potential.b

    def build_grid(self) -> FrequencyGrid:
        if self.grid_kind == "trapezoid":
            base = trapezoid_grid(self.omega, self.n_freq)
        elif self.grid_kind == "accelerated":
            base = accelerated_grid(self.omega, **self.accel_params)
        else:
            raise DomainError(f"grid_kind must be one of {GRID_KINDS}, "
                              f"got {self.grid_kind!r}")
        return richardson_combine(base, self.richardson_levels,
                                  self.richardson_ratio)

    def build_config(self) -> ReconstructionConfig:
        return ReconstructionConfig(h=self.h, grid=self.build_grid(),
                                    scheme=self.scheme, n=self.n,
                                    a=self.a, b=self.b)


# Per-figure experiment settings.  The square-well frequency count is not
# stated alongside its figure; the gauss-n0 value is reused.  Named presets
# run on the accelerated (graded-log + Gauss-Legendre) grid with one
# Richardson level, matching the published accelerated pipeline; n_freq is
# the reported frequency count and takes effect whenever grid_kind is
# switched to "trapezoid" (the baseline first-order algorithm).  The square
# well runs without Richardson extrapolation: its discontinuity voids the
# even 1/k^2 tail expansion the combination relies on, and extrapolating
# anyway was measured to make the plateau worse, not better.
_LIGHT_LOG = {"log_depth": 24, "log_order": 8}

_PRESETS = {
    "gauss-n0": dict(potential=gaussian_bump, n=0, omega=160.0, n_freq=270,
                     h=1.0 / 20000),
    "cos-5-6": dict(potential=lambda: cosine_potential(5, 6), n=0,
                    omega=160.0, n_freq=270, h=1.0 / 20000),
    "gauss-n4": dict(potential=gaussian_bump, n=4, omega=240.0, n_freq=470,
                     h=1.0 / 40000),
    "cos-9-10": dict(potential=lambda: cosine_potential(9, 10), n=0,
                     omega=160.0, n_freq=270, h=1.0 / 20000),
    "square": dict(potential=square_well, n=0, omega=160.0, n_freq=270,
                   h=1.0 / 20000, richardson_levels=0),
    "zero": dict(potential=zero_potential, n=0, omega=160.0, n_freq=270,
                 h=1.0 / 20000),
    # desk-scale variants used by the fast gates
    "gauss-n0-reduced": dict(potential=gaussian_bump, n=0, omega=80.0,
                             n_freq=200, h=1.0 / 4000),
    "zero-reduced": dict(potential=zero_potential, n=0, omega=40.0,
                         n_freq=128, h=1.0 / 1000),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    """Build a named experiment spec; keyword overrides replace fields."""
    try:
        entry = dict(_PRESETS[name])
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from "
                          f"{sorted(_PRESETS)}") from None
    pot = entry.pop("potential")()
    spec = ExperimentSpec(name=name, potential=pot, grid_kind="accelerated",
                          accel_params=dict(_LIGHT_LOG), **entry)
    if overrides:
        spec = replace(spec, **overrides)
    return spec


def preset_names() -> list[str]:
    return sorted(_PRESETS)


@dataclass
class ErrorReport:
    """Reconstruction error against the known truth, plus wall times."""

    name: str
    linf: float
    l2: float
    radii: np.ndarray
    errors: np.ndarray
    wall_generate_s: float
    wall_solve_s: float
    result: ReconstructionResult

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(f"# experiment={self.name} linf={self.linf:.17g} "
                    f"l2={self.l2:.17g}\n")
            for r, e in zip(self.radii, self.errors):
                f.write(f"{r:.17g},{e:.17g}\n")


def error_report(name: str, result: ReconstructionResult,
                 pot: RadialPotential, wall_generate: float,
                 wall_solve: float) -> ErrorReport:
    truth = np.asarray(pot(result.radii), dtype=float)
    errors = result.q_hat - truth
    linf = float(np.max(np.abs(errors)))
    l2 = float(math.sqrt(np.trapezoid(errors ** 2, result.radii)))
    return ErrorReport(name=name, linf=linf, l2=l2, radii=result.radii,
                       errors=errors, wall_generate_s=wall_generate,
                       wall_solve_s=wall_solve, result=result)


def run_experiment(spec: ExperimentSpec, out_dir=None, workers: int = 1,
                   make_figures: bool = True) -> ErrorReport:
    """Generate data, reconstruct, and (optionally) write the artifact set.

    Artifacts: `<name>_data.csv`, `<name>_grid.csv`,
    `<name>_reconstruction.csv`, `<name>_error.csv`,
    `<name>_diagnostics.txt` and three figures (recovered vs exact,
    initial-data defect, error curve).
    """
    grid = spec.build_grid()
    t0 = time.perf_counter()
    data = generate_data(spec.potential, spec.n, grid,
                         steps=spec.forward_steps, workers=workers)
    t_gen = time.perf_counter() - t0

    cfg = ReconstructionConfig(h=spec.h, grid=grid, scheme=spec.scheme,
                               n=spec.n, a=spec.a, b=spec.b)
    t0 = time.perf_counter()
    result = reconstruct(data, cfg)
    t_solve = time.perf_counter() - t0

    report = error_report(spec.name, result, spec.potential, t_gen, t_solve)

    if out_dir is not None:
        from pathlib import Path
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = out / spec.name
        data.write_csv(f"{stem}_data.csv")
        grid.write_csv(f"{stem}_grid.csv")
        result.write_csv(f"{stem}_reconstruction.csv")
        report.write_csv(f"{stem}_error.csv")
        result.write_diagnostics(f"{stem}_diagnostics.txt")
        if make_figures:
            from .plots import render_experiment_figures
            render_experiment_figures(spec, data, report, out)
    return report


@dataclass
class SlopeReport:
    """Log-log convergence rate along one refinement axis."""

    axis: str
    parameters: np.ndarray
    errors: np.ndarray
    slope: float

    def __str__(self):
        rows = "\n".join(f"  {p:12.6g}  {e:.6e}"
                         for p, e in zip(self.parameters, self.errors))
        return (f"convergence in {self.axis}: slope {self.slope:+.3f}\n"
                f"  {'level':>12}  error\n{rows}")


def _common_grid_error(res_coarse: ReconstructionResult,
                       res_fine: ReconstructionResult) -> float:
    stride = (len(res_fine.radii) - 1) // (len(res_coarse.radii) - 1)
    return float(np.max(np.abs(res_coarse.q_hat - res_fine.q_hat[::stride])))


def convergence_study(spec: ExperimentSpec, axis: str, levels: int = 3,
                      budget_s: float | None = None,
                      workers: int = 1) -> SlopeReport:
    """Measure the error slope along one axis, holding the others fixed.

    ``axis='h'`` halves the spatial step per level and compares against the
    finest run; ``axis='omega'`` doubles the bandlimit (node counts scale
    along, so the grid resolution in k is preserved); ``axis='nfreq'``
    doubles the trapezoid node count at fixed bandlimit.  Refuses upfront
    when the projected finest-level cost exceeds ``budget_s``.
    """
    if levels < 3:
        raise DomainError(f"need at least 3 levels, got {levels}")
    if axis not in ("h", "omega", "nfreq"):
        raise DomainError(f"axis must be h, omega or nfreq, got {axis!r}")
    if axis == "nfreq" and spec.grid_kind != "trapezoid":
        raise DomainError("nfreq refinement applies to trapezoid grids")

    # measured levels 0..levels-1; the reference sits three refinements past
    # the last measured level so its own error does not bias the slope fit
    specs = []
    for lvl in list(range(levels)) + [levels + 2]:
        fac = 2 ** lvl
        if axis == "h":
            specs.append(replace(spec, h=spec.h / fac))
        elif axis == "omega":
            specs.append(replace(spec, omega=spec.omega * fac,
                                 n_freq=(spec.n_freq - 1) * fac + 1))
        else:
            specs.append(replace(spec, n_freq=(spec.n_freq - 1) * fac + 1))

    if budget_s is not None:
        t0 = time.perf_counter()
        run_experiment(specs[0], out_dir=None, workers=workers,
                       make_figures=False)
        t_coarse = time.perf_counter() - t0
        cost = ((specs[0].h / specs[-1].h)
                * len(specs[-1].build_grid()) / len(specs[0].build_grid()))
        estimate = t_coarse * cost
        if estimate > budget_s:
            raise BudgetExceededError(
                f"finest {axis} level projected at {estimate:.0f} s "
                f"exceeds budget {budget_s:.0f} s")

    results = [run_experiment(s, out_dir=None, workers=workers,
                              make_figures=False) for s in specs]

    if axis == "h":
        params = np.array([s.h for s in specs[:-1]])
        errors = np.array([_common_grid_error(r.result, results[-1].result)
                           for r in results[:-1]])
        slope = float(np.polyfit(np.log(params), np.log(errors), 1)[0])
    else:
        params = np.array([s.omega if axis == "omega" else s.n_freq
                           for s in specs[:-1]])
        errors = np.array([float(np.max(np.abs(
            r.result.q_hat - results[-1].result.q_hat))) for r in results[:-1]])
        slope = float(np.polyfit(np.log(params), np.log(errors), 1)[0])
    return SlopeReport(axis=axis, parameters=params, errors=errors, slope=slope)
