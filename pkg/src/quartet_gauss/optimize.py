"""Alternating minimization over the Bogoliubov rotation and the quartet angles.

A gamma step moves ``O <- expm(-dt h) O`` along the steepest descent
generator; beta steps are plain gradient steps.  Both use a
Barzilai-Borwein trial step followed by Armijo backtracking, and a step is
only accepted if it lowers the energy, so recorded energies never increase.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .energy import VariationalPoint, energy_and_gradients
from .majorana import DEFECT_TOL, orthogonality_defect, random_orthogonal, reorthonormalize
from .models import FermionModel

log = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    def __init__(self, msg: str, trajectory: "Trajectory"):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class OptimizerConfig:
    dt0: float = 0.1
    ls_shrink: float = 0.5
    ls_grow: float = 2.0
    armijo: float = 1e-4
    max_iters: int = 5000
    tol_grad: float = 1e-7
    tol_energy: float = 1e-14
    energy_window: int = 50
    beta_steps_per_gamma_step: int = 1
    restarts: int = 1
    seed: int = 0
    init_scale: float = np.pi
    beta_init_scale: float = 0.05
    max_backtracks: int = 60

    def __post_init__(self):
        if self.dt0 <= 0:
            raise ValueError("dt0 must be positive")
        if not 0 < self.ls_shrink < 1 < self.ls_grow:
            raise ValueError("need 0 < ls_shrink < 1 < ls_grow")
        if self.tol_grad <= 0 or self.tol_energy <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0 or self.restarts < 1 or self.beta_steps_per_gamma_step < 0:
            raise ValueError("iteration counts out of range")


@dataclass
class Trajectory:
    rows: list[tuple[int, float, float, float, float, float]] = field(default_factory=list)

    COLUMNS = ("iter", "energy", "grad_gamma_norm", "grad_beta_norm", "dt", "seconds")

    def append(self, *row) -> None:
        self.rows.append(tuple(row))

    @property
    def energies(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(x)) for x in r[1:]])

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class OptimizationResult:
    point: VariationalPoint
    energy: float
    trajectory: Trajectory
    grad_gamma_norm: float
    grad_beta_norm: float
    converged: bool
    iterations: int


def _armijo(f, e0: float, slope: float, dt: float, cfg: OptimizerConfig):
    """Backtrack from ``dt``; ``slope`` is the (negative) directional derivative per unit dt."""
    for _ in range(cfg.max_backtracks):
        e = f(dt)
        if np.isfinite(e) and e <= e0 + cfg.armijo * dt * slope and e < e0:
            return dt, e
        dt *= cfg.ls_shrink
    return 0.0, e0


def _run(
    model: FermionModel,
    start: VariationalPoint,
    cfg: OptimizerConfig,
    optimize_beta: bool,
    project=None,
    callback=None,
) -> OptimizationResult:
    T, W, off, layout = model.T, model.W, model.offset, model.layout
    point = start
    traj = Trajectory()
    t0 = time.perf_counter()

    def grads(pt, want_gamma=True, want_beta=optimize_beta):
        e, h, gb = energy_and_gradients(
            T, W, pt, layout, off, want_gamma=want_gamma, want_beta=want_beta
        )
        if h is not None and project is not None:
            h = project(h)
        return e, h, gb

    e, h, gb = grads(point)
    if not np.isfinite(e):
        raise NumericalAbort("non-finite initial energy", traj)
    gb_norm = float(np.linalg.norm(gb)) if optimize_beta else 0.0
    traj.append(0, e, float(np.linalg.norm(h)), gb_norm, 0.0, 0.0)
    dt_g, dt_b = cfg.dt0, cfg.dt0
    prev_h, prev_step_g = None, None
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        hn = float(np.linalg.norm(h))
        if max(hn, gb_norm) < cfg.tol_grad:
            converged = True
            it -= 1
            break
        # gamma step
        if prev_h is not None and prev_step_g is not None:
            y = h - prev_h
            sy = float(np.sum(prev_step_g * y))
            if sy > 0:
                dt_g = float(np.sum(prev_step_g * prev_step_g)) / sy
        O = point.O
        dt_used = 0.0
        if hn > 0:

            def f_gamma(dt):
                return energy_and_gradients(
                    T, W, point.with_O(expm(-dt * h) @ O), layout, off,
                    want_gamma=False, want_beta=False,
                )[0]

            dt_used, e_new = _armijo(f_gamma, e, -hn * hn, dt_g, cfg)
            if dt_used > 0:
                On = expm(-dt_used * h) @ O
                if orthogonality_defect(On) > DEFECT_TOL:
                    On = reorthonormalize(On)
                point = point.with_O(On)
                e = e_new
                prev_step_g = -dt_used * h
                dt_g = dt_used * cfg.ls_grow
            else:
                prev_step_g = None
                dt_g = cfg.dt0
        prev_h = h
        moved = dt_used > 0
        # beta steps
        if optimize_beta and cfg.beta_steps_per_gamma_step:
            for _ in range(cfg.beta_steps_per_gamma_step):
                _, _, gb = grads(point, want_gamma=False)
                gn = float(np.linalg.norm(gb))
                if gn == 0:
                    break
                beta0 = point.beta

                def f_beta(dt):
                    return energy_and_gradients(
                        T, W, point.with_beta(beta0 - dt * gb), layout, off,
                        want_gamma=False, want_beta=False,
                    )[0]

                db, e_new = _armijo(f_beta, e, -gn * gn, dt_b, cfg)
                if db > 0:
                    point = point.with_beta(beta0 - db * gb)
                    e = e_new
                    dt_b = db * cfg.ls_grow
                    moved = True
                else:
                    dt_b = cfg.dt0
                    break
        e, h, gb = grads(point)
        if not np.isfinite(e):
            raise NumericalAbort(f"non-finite energy at iteration {it}", traj)
        gb_norm = float(np.linalg.norm(gb)) if optimize_beta else 0.0
        traj.append(it, e, float(np.linalg.norm(h)), gb_norm, dt_used, time.perf_counter() - t0)
        if it >= cfg.energy_window:
            e_old = traj.rows[-cfg.energy_window - 1][1]
            if abs(e_old - e) <= cfg.tol_energy * max(1.0, abs(e)):
                converged = True
                break
        if callback is not None:
            callback(it, point)
        if not moved:
            # no step lowers the energy in floating point: stationary to machine precision
            converged = True
            break
        if it % 500 == 0:
            log.info("iter %d  E=%.12f  |h|=%.3e  |dE/dbeta|=%.3e", it, e, np.linalg.norm(h), gb_norm)
    return OptimizationResult(
        point, e, traj, float(np.linalg.norm(h)), gb_norm, converged, it
    )


def _rngs(cfg: OptimizerConfig) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)]


def minimize_gaussian(
    model: FermionModel,
    config: OptimizerConfig = OptimizerConfig(),
    init: VariationalPoint | None = None,
) -> OptimizationResult:
    """Best generalized Hartree-Fock state: beta pinned at zero, ``O`` optimized."""
    layout = model.layout
    best = None
    for r, rng in enumerate(_rngs(config)):
        if init is not None and r == 0:
            start = VariationalPoint(np.zeros(layout.n_quartets), init.O)
        else:
            start = VariationalPoint(
                np.zeros(layout.n_quartets), random_orthogonal(layout.d, rng, config.init_scale)
            )
        res = _run(model, start, config, optimize_beta=False)
        log.info("gHFT restart %d: E=%.12f (%d iters)", r, res.energy, res.iterations)
        if best is None or res.energy < best.energy:
            best = res
    return best


def minimize(
    model: FermionModel,
    config: OptimizerConfig = OptimizerConfig(),
    init: VariationalPoint | str | None = None,
    gaussian: OptimizationResult | None = None,
) -> OptimizationResult:
    """Full optimization over ``(beta, O)``.

    Default start: the gHFT optimum (computed unless ``gaussian`` is given)
    with every beta perturbed by ``N(0, beta_init_scale)``.  ``init="random"``
    draws ``O`` and ``beta`` at random instead.  Over restarts the lowest
    final energy wins.
    """
    layout = model.layout
    if init is None and gaussian is None:
        gaussian = minimize_gaussian(model, config)
    best = None
    for r, rng in enumerate(_rngs(config)):
        if isinstance(init, VariationalPoint):
            start = init if r == 0 else init.with_beta(
                init.beta + rng.normal(scale=config.beta_init_scale, size=layout.n_quartets)
            )
        elif init == "random":
            start = VariationalPoint(
                rng.uniform(-np.pi / 2, np.pi / 2, layout.n_quartets),
                random_orthogonal(layout.d, rng, config.init_scale),
            )
        else:
            start = gaussian.point.with_beta(
                rng.normal(scale=config.beta_init_scale, size=layout.n_quartets)
            )
        res = _run(model, start, config, optimize_beta=True)
        log.info("restart %d: E=%.12f (%d iters)", r, res.energy, res.iterations)
        if best is None or res.energy < best.energy:
            best = res
    if gaussian is not None and best.energy > gaussian.energy:
        # every perturbed start ended above gHFT; a monotone run from the
        # unperturbed optimum cannot
        best = _run(model, gaussian.point, config, optimize_beta=True)
    return best


def run_projected_flow(
    model: FermionModel,
    start: VariationalPoint,
    config: OptimizerConfig,
    project,
    callback=None,
) -> OptimizationResult:
    """Gamma-only descent with the generator mapped through ``project`` each step."""
    return _run(model, start, config, optimize_beta=False, project=project, callback=callback)
