"""Batch front end: ``quartet-gauss {run,validate,ed,fsbs-m1,pairing}``.

Runs are described by an INI file::

    [lattice]
    lx = 4
    ly = 1
    [model]
    kind = hubbard        ; or h4
    t = 1.0
    u = 4.0
    mu = 0.0
    bc = periodic
    [quartets]
    tiling = h-domino     ; v-domino, none, file:<path>
    [optimizer]
    max_iters = 2000
    seed = 0
    [tasks]
    run = ed, ghft, optimize, pairing, observables
    [output]
    dir = out

Exit status: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import ed, fsbs_m1, observables
from .energy import VariationalPoint, covariance, particle_number, point_is_valid
from .majorana import orthogonality_defect, read_matrix, write_matrix
from .models import (
    ConfigurationError,
    FermionModel,
    HubbardParams,
    build_h4,
    build_hubbard,
    hopping_matrix,
    hubbard_layout,
)
from .optimize import NumericalAbort, OptimizerConfig, minimize, minimize_gaussian
from .pairing import DEFAULT_PAIRING_CONFIG, pairing

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3
TASKS = ("ed", "ghft", "optimize", "pairing", "observables", "fsbs-m1")

_OPT_KEYS = {f.name: f.type for f in fields(OptimizerConfig)}
SCHEMA: dict[str, dict[str, str]] = {
    "lattice": {"lx": "int", "ly": "int"},
    "model": {"kind": "str", "t": "float", "u": "float", "mu": "float", "bc": "str"},
    "quartets": {"tiling": "str"},
    "optimizer": {k: ("int" if t in ("int", int) else "float") for k, t in _OPT_KEYS.items()},
    "tasks": {"run": "list"},
    "output": {"dir": "str"},
    "state": {"path": "str"},
    "pairing": {"restarts": "int", "seed": "int"},
    "fsbs-m1": {"t": "grid", "u": "grid", "mu": "grid"},
}


def parse_grid(text: str) -> list[float]:
    """``start:stop:num`` (inclusive, evenly spaced) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        a, b, n = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(n))]
    return [float(v) for v in text.split(",") if v.strip()]


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "list":
        return [v.strip() for v in raw.replace("\n", ",").split(",") if v.strip()]
    if kind == "grid":
        return parse_grid(raw)
    return raw.strip()


@dataclass
class RunConfig:
    params: HubbardParams
    kind: str = "hubbard"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    tasks: list[str] = field(default_factory=lambda: ["ghft", "optimize"])
    out: Path = Path("out")
    state: Path | None = None
    pairing_restarts: int = 8
    pairing_seed: int = 0
    m1_grid: tuple[list[float], list[float], list[float]] = (
        parse_grid("-2:2:5"), parse_grid("-2:2:5"), parse_grid("-2:2:5"),
    )
    source: Path | None = None

    def build_model(self) -> FermionModel:
        if self.kind == "hubbard":
            return build_hubbard(self.params)
        layout = hubbard_layout(self.params)
        # spin-diagonal hopping amplitude t on every bond
        t_modes = np.kron(-hopping_matrix(self.params), np.eye(2))
        return build_h4(layout, t_modes, self.params.U)


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate; every problem is raised as ``ConfigurationError`` naming the key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"{section}: unknown section")
        values[section] = {}
        for key, raw in cp.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigurationError(f"{section}.{key}: unknown key")
            try:
                values[section][key] = _convert(kind, raw)
            except ValueError as exc:
                raise ConfigurationError(f"{section}.{key}: expected {kind}, got {raw!r}") from exc

    def get(section, key, default=None):
        return values.get(section, {}).get(key, default)

    tasks = get("tasks", "run", ["ghft", "optimize"])
    for t in tasks:
        if t not in TASKS:
            raise ConfigurationError(f"tasks.run: unknown task {t!r} (choose from {', '.join(TASKS)})")
    kind = get("model", "kind", "hubbard")
    if kind not in ("hubbard", "h4"):
        raise ConfigurationError(f"model.kind: expected hubbard or h4, got {kind!r}")
    state = get("state", "path")
    if state is not None:
        state = (path.parent / state).resolve()
        if not state.is_dir():
            raise ConfigurationError(f"state.path: directory {state} does not exist")
    if any(t in tasks for t in ("pairing", "observables")) and "optimize" not in tasks and state is None:
        raise ConfigurationError("tasks.run: pairing/observables need 'optimize' or state.path")

    tiling = get("quartets", "tiling", "h-domino")
    if tiling.startswith("file:"):
        qpath = (path.parent / tiling[5:]).resolve()
        if not qpath.is_file():
            raise ConfigurationError(f"quartets.tiling: file {qpath} does not exist")
        tiling = f"file:{qpath}"
    if "lx" not in values.get("lattice", {}):
        raise ConfigurationError("lattice.lx: required")
    try:
        params = HubbardParams(
            Lx=get("lattice", "lx"),
            Ly=get("lattice", "ly", 1),
            t=get("model", "t", 1.0),
            U=get("model", "u", 0.0),
            mu=get("model", "mu", 0.0),
            bc=get("model", "bc", "periodic"),
            tiling=tiling,
        )
        hubbard_layout(params)
    except ConfigurationError as exc:
        raise ConfigurationError(f"lattice/quartets: {exc}") from exc
    try:
        optimizer = OptimizerConfig(**values.get("optimizer", {}))
    except ValueError as exc:
        raise ConfigurationError(f"optimizer: {exc}") from exc
    out = Path(get("output", "dir", "out"))
    if not out.is_absolute():
        out = path.parent / out
    grid = tuple(get("fsbs-m1", k, parse_grid("-2:2:5")) for k in ("t", "u", "mu"))
    return RunConfig(
        params=params,
        kind=kind,
        optimizer=optimizer,
        tasks=tasks,
        out=out,
        state=state,
        pairing_restarts=get("pairing", "restarts", 8),
        pairing_seed=get("pairing", "seed", 0),
        m1_grid=grid,
        source=path,
    )


def save_state(directory: Path, point: VariationalPoint, layout) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "G.txt", covariance(point, layout))
    write_matrix(directory / "beta.txt", point.beta)
    write_matrix(directory / "O.txt", point.O)


def load_state(directory: Path, layout) -> VariationalPoint:
    beta = read_matrix(directory / "beta.txt").reshape(-1)
    O = read_matrix(directory / "O.txt")
    if O.shape != (layout.d, layout.d) or beta.shape != (layout.n_quartets,):
        raise ConfigurationError("state.path: stored state does not match the configured layout")
    point = VariationalPoint(beta, O)
    if not point_is_valid(point):
        raise ConfigurationError(f"state.path: O is not orthogonal (defect {orthogonality_defect(O):.2e})")
    return point


def _write_m1(cfg: RunConfig, path: Path) -> None:
    fsbs_m1.write_grid_csv(path, fsbs_m1.grid_rows(*cfg.m1_grid))


def run(cfg: RunConfig) -> dict:
    """Execute the configured tasks in order; returns the summary record."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    summary: dict = {
        "model": cfg.kind,
        "lattice": [p.Lx, p.Ly],
        "t": p.t, "U": p.U, "mu": p.mu, "bc": p.bc,
        "tasks": list(cfg.tasks),
        "seed": cfg.optimizer.seed,
    }
    needs_model = any(t != "fsbs-m1" for t in cfg.tasks)
    model = cfg.build_model() if needs_model else None
    gaussian = None
    point = load_state(cfg.state, model.layout) if cfg.state is not None and model else None
    for task in cfg.tasks:
        log.info("task %s", task)
        if task == "fsbs-m1":
            _write_m1(cfg, cfg.out / "fsbs_m1.csv")
        elif task == "ed":
            rows = ed.sector_energies(model.T, model.W, model.offset, model.layout)
            with open(cfg.out / "ed_sectors.csv", "w") as fh:
                fh.write("n_up,n_down,E0\n")
                for (nu, nd), e in rows:
                    fh.write(f"{nu},{nd},{e!r}\n")
            summary["E_ED"] = min(e for _, e in rows)
        elif task == "ghft":
            gaussian = _guarded(lambda: minimize_gaussian(model, cfg.optimizer), cfg.out, "ghft")
            gaussian.trajectory.to_csv(cfg.out / "trajectory_ghft.csv")
            summary["E_gHFT"] = gaussian.energy
            summary["iterations_gHFT"] = gaussian.iterations
        elif task == "optimize":
            res = _guarded(lambda: minimize(model, cfg.optimizer, gaussian=gaussian), cfg.out, "optimize")
            res.trajectory.to_csv(cfg.out / "trajectory.csv")
            point = res.point
            save_state(cfg.out / "state", point, model.layout)
            summary.update(
                E_final=res.energy,
                iterations=res.iterations,
                converged=res.converged,
                grad_gamma_norm=res.grad_gamma_norm,
                grad_beta_norm=res.grad_beta_norm,
                beta=[float(b) for b in point.beta],
            )
        elif task == "pairing":
            pr = pairing(point, model.layout, DEFAULT_PAIRING_CONFIG,
                         restarts=cfg.pairing_restarts, seed=cfg.pairing_seed)
            pr.trajectory.to_csv(cfg.out / "trajectory_pairing.csv")
            summary.update(M=pr.M, min_P=pr.min_P)
        elif task == "observables":
            n_up, n_dn, ntot = observables.occupations(point, model.layout)
            observables.write_occupations_csv(cfg.out / "occupations.csv", n_up, n_dn)
            C = observables.spin_spin_field(point, p)
            S = observables.structure_factor(C)
            A = observables.af_order_field(point, p)
            observables.write_correlation_csv(cfg.out / "spin_spin.csv", C)
            observables.write_structure_factor_csv(cfg.out / "structure_factor.csv", S)
            observables.write_correlation_csv(cfg.out / "af_order.csv", A)
            summary.update(S_peak=list(S.argmax()), S_imag_residual=S.imag_residual)
    if point is not None:
        summary["N_tot"] = particle_number(point, model.layout)[1]
    with open(cfg.out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _guarded(fn, out: Path, label: str):
    try:
        return fn()
    except NumericalAbort as exc:
        exc.trajectory.to_csv(out / f"trajectory_{label}_aborted.csv")
        raise


def _thread_limit(n: int | None):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    opt = cfg.optimizer
    if args.seed is not None:
        opt = replace(opt, seed=args.seed)
    if args.max_iters is not None:
        opt = replace(opt, max_iters=args.max_iters)
    cfg.optimizer = opt
    if args.out is not None:
        cfg.out = Path(args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.validate:
        print(f"{args.config}: ok")
        return EXIT_OK
    summary = run(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def _cmd_ed(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    print("n_up,n_down,E0")
    for (nu, nd), e in ed.sector_energies(model.T, model.W, model.offset, model.layout):
        print(f"{nu},{nd},{e!r}")
    return EXIT_OK


def _cmd_fsbs(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig(HubbardParams(2), tasks=["fsbs-m1"])
    grid = list(cfg.m1_grid)
    for i, g in enumerate((args.t, args.u, args.mu)):
        if g is not None:
            grid[i] = parse_grid(g)
    cfg.m1_grid = tuple(grid)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_m1(cfg, out / "fsbs_m1.csv")
    else:
        print("t,U,mu,E0,x,rho0")
        for r in fsbs_m1.grid_rows(*cfg.m1_grid):
            print(f"{r[0]!r},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]},{r[5]!r}")
    return EXIT_OK


def _cmd_pairing(args) -> int:
    cfg = load_config(args.config)
    state = Path(args.state) if args.state else cfg.state
    if state is None:
        raise ConfigurationError("pairing: give --state or state.path")
    layout = hubbard_layout(cfg.params)
    point = load_state(state, layout)
    seed = cfg.pairing_seed if args.seed is None else args.seed
    pr = pairing(point, layout, DEFAULT_PAIRING_CONFIG, restarts=cfg.pairing_restarts, seed=seed)
    print(json.dumps({"M": pr.M, "N_tot": pr.N_tot, "min_P": pr.min_P}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quartet-gauss", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--max-iters", type=int)
        sp.add_argument("--threads", type=int)

    sp = sub.add_parser("run", help="execute the tasks listed in the config")
    common(sp)
    sp.add_argument("--validate", action="store_true", help="check the config and exit")
    sp.set_defaults(func=_cmd_run)
    sp = sub.add_parser("validate", help="schema-check a config without computing")
    common(sp)
    sp.set_defaults(func=_cmd_validate)
    sp = sub.add_parser("ed", help="print ground energies per (N_up, N_down) sector")
    common(sp)
    sp.set_defaults(func=_cmd_ed)
    sp = sub.add_parser("fsbs-m1", help="tabulate the M=1 energy density over a grid")
    common(sp, config_required=False)
    sp.add_argument("--t", help="grid 'start:stop:num' or comma list")
    sp.add_argument("--u")
    sp.add_argument("--mu")
    sp.set_defaults(func=_cmd_fsbs)
    sp = sub.add_parser("pairing", help="pairing measure of a stored state")
    common(sp)
    sp.add_argument("--state", help="directory with beta.txt and O.txt")
    sp.set_defaults(func=_cmd_pairing)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ed.FockSpaceTooLarge as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
