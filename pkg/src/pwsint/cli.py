"""Experiment runner: integrate, sweep, perturb, conserve, classify.

Configuration is a plain key=value text file with dotted keys
(``solver.fp_tol=1e-14``), overridable with repeated ``--set key=value``
flags.  All results are written as CSV with floats at 17 significant
digits so they round-trip exactly.  Exit codes: 0 success, 2
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import conserved_error_series, estimate_order
from .engine import Trajectory, integrate
from .errors import ConfigError, NumericalError, PwsIntError
from .model import PwsSystem, RegionSide, classify_interface_point
from .oracles import harmonic_oracle, reference_trajectory
from .schemes import default_scheme_name, resolve_scheme
from .solvers import SolverConfig
from .systems import make_system

_SYSTEM_PARAM_KEYS = {
    "harmonic": ("omega2_minus", "omega2_plus"),
    "elliptic": ("a_minus", "a_plus", "radius"),
}

_DEFAULT_X0 = {"harmonic": (1.0, 1.0), "elliptic": (-1.0, -1.0)}


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def parse_kv_file(path) -> dict[str, str]:
    kv: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            kv[key.strip()] = value.strip()
    return kv


def _get(kv: dict, key: str, conv, default):
    if key not in kv:
        return default
    try:
        return conv(kv[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {kv[key]!r} ({exc})") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


@dataclass
class ExperimentConfig:
    system: PwsSystem
    scheme_minus_name: str
    scheme_plus_name: str
    x0: tuple
    t0: float
    T: float
    tau: float
    taus: tuple
    tau_ref: float
    perturbation: tuple | None
    solver: SolverConfig
    out: str
    seed: int
    events_after: tuple
    max_crossings_per_step: int
    max_events: int
    raw: dict = field(default_factory=dict)

    def schemes(self):
        return (resolve_scheme(self.scheme_minus_name, self.system, RegionSide.MINUS),
                resolve_scheme(self.scheme_plus_name, self.system, RegionSide.PLUS))


def build_config(kv: dict[str, str], out: str = "pwsint") -> ExperimentConfig:
    name = kv.get("system", "harmonic")
    if name not in _SYSTEM_PARAM_KEYS:
        raise ConfigError(f"unknown system {name!r}")
    params = {}
    for p in _SYSTEM_PARAM_KEYS[name]:
        if f"system.{p}" in kv:
            params[p] = _get(kv, f"system.{p}", float, None)
    system = make_system(name, **params)

    default_scheme = default_scheme_name(system)
    solver_kwargs = {}
    for fname, conv in (("fp_tol", float), ("fp_max_iter", int),
                        ("newton_fallback_after", int), ("root_tol_t", float),
                        ("root_max_iter", int), ("fd_jacobian_step", float)):
        if f"solver.{fname}" in kv:
            solver_kwargs[fname] = _get(kv, f"solver.{fname}", conv, None)
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    perturbation = None
    if "perturbation.p" in kv:
        perturbation = (_get(kv, "perturbation.c", float, 1.0),
                        _get(kv, "perturbation.p", float, None))

    t0 = _get(kv, "t0", float, 0.0)
    T = _get(kv, "T", float, 10.0)
    tau = _get(kv, "tau", float, 1e-3)
    if tau <= 0.0:
        raise ConfigError("tau must be positive")
    if T < t0:
        raise ConfigError("T must not precede t0")

    cfg = ExperimentConfig(
        system=system,
        scheme_minus_name=kv.get("scheme.minus", default_scheme),
        scheme_plus_name=kv.get("scheme.plus", default_scheme),
        x0=_get(kv, "x0", _floats, _DEFAULT_X0[name]),
        t0=t0, T=T, tau=tau,
        taus=_get(kv, "taus", _floats, ()),
        tau_ref=_get(kv, "tau_ref", float, 1.6e-5),
        perturbation=perturbation,
        solver=solver,
        out=out,
        seed=_get(kv, "seed", int, 0),
        events_after=_get(kv, "events_after", _ints, (10, 20, 30)),
        max_crossings_per_step=_get(kv, "max_crossings_per_step", int, 4),
        max_events=_get(kv, "max_events", int, 100_000),
        raw=dict(kv),
    )
    cfg.schemes()  # validate scheme names now, not at run time
    return cfg


def _run(config: ExperimentConfig, scheme_names: tuple[str, str] | None = None,
         tau: float | None = None,
         perturbation: tuple | None | str = "config") -> Trajectory:
    if scheme_names is None:
        dvf_minus, dvf_plus = config.schemes()
    else:
        dvf_minus = resolve_scheme(scheme_names[0], config.system, RegionSide.MINUS)
        dvf_plus = resolve_scheme(scheme_names[1], config.system, RegionSide.PLUS)
    pert = config.perturbation if perturbation == "config" else perturbation
    return integrate(config.system, dvf_minus, dvf_plus, config.x0, config.t0,
                     config.T, tau if tau is not None else config.tau,
                     cfg=config.solver, perturbation=pert,
                     max_crossings_per_step=config.max_crossings_per_step,
                     max_events=config.max_events)


def _side_name(side) -> str:
    return side.value if side is not None else ""


def cmd_integrate(config: ExperimentConfig) -> list[str]:
    """Run one trajectory; emit <out>_trajectory.csv and <out>_events.csv."""
    traj = _run(config)
    sys_ = config.system
    d = sys_.dim
    d_psi = sys_.conserved_minus.d_psi
    psi_err = conserved_error_series(traj, sys_)

    traj_path = f"{config.out}_trajectory.csv"
    header = (["step", "t"] + [f"x_{i+1}" for i in range(d)] + ["g", "side"]
              + [f"psi_{i+1}" for i in range(d_psi)] + ["psi_error"])

    def traj_rows():
        for k in range(len(traj.times)):
            seg = traj.segment_at(k)
            x = traj.states[k]
            psi = sys_.conserved(seg.side).values(x)
            yield ([k, float(traj.times[k])] + [float(v) for v in x]
                   + [sys_.surface.value(x), seg.side.value]
                   + [float(v) for v in psi] + [float(psi_err[k])])

    write_csv(traj_path, header, traj_rows())

    ev_path = f"{config.out}_events.csv"
    ev_header = (["index", "t_hat"] + [f"x_hat_{i+1}" for i in range(d)]
                 + ["side_from", "side_to", "residual_g", "psi_level_residual",
                    "iters_locate", "iters_complete", "perturbation_applied"])

    def ev_rows():
        for i, ev in enumerate(traj.events):
            yield ([i, ev.t_hat] + [float(v) for v in ev.x_hat]
                   + [_side_name(ev.side_from), _side_name(ev.side_to),
                      ev.residual_g, ev.psi_level_residual,
                      ev.stats_locate.iterations if ev.stats_locate else 0,
                      ev.stats_complete.iterations if ev.stats_complete else 0,
                      ev.perturbation_applied])

    write_csv(ev_path, ev_header, ev_rows())
    return [traj_path, ev_path]


def _reference_for(config: ExperimentConfig):
    """Final-state function and event times used as ground truth."""
    sys_ = config.system
    # A run with step tau ends at t0 + round((T - t0)/tau) * tau, which can
    # exceed T slightly; pad the reference horizon to cover every grid end.
    margin = max(config.taus) if config.taus else config.tau
    T_ref = config.T + margin
    if sys_.name == "harmonic":
        oracle, events = harmonic_oracle(sys_.params["omega2_minus"],
                                         sys_.params["omega2_plus"],
                                         config.x0, config.t0, T_ref)
        return oracle, [ev.t_star for ev in events]
    smallest = min(config.taus) if config.taus else config.tau
    ref, events = reference_trajectory(sys_, config.x0, config.t0, T_ref,
                                       config.tau_ref, cfg=config.solver,
                                       tau_study=smallest)

    def state(t: float):
        # linear interpolation between reference samples; its O(tau_ref^2)
        # error is far below the errors of any run measured against it
        pos = (t - config.t0) / config.tau_ref
        k = min(max(int(math.floor(pos)), 0), len(ref.times) - 2)
        w = pos - k
        return (1.0 - w) * ref.states[k] + w * ref.states[k + 1]

    return state, [ev.t_star for ev in events]


def cmd_sweep(config: ExperimentConfig,
              perturbation: tuple | None | str = "config") -> list[str]:
    """Convergence study over the configured tau list; emit <out>_order.csv."""
    if len(config.taus) < 3:
        raise ConfigError("sweep needs at least 3 values in 'taus'")
    ref_state, ref_times = _reference_for(config)
    after = config.events_after
    cols = ["final_state_error"] + [f"time_error_after_{n}" for n in after]
    rows = []
    table: dict[str, list[float]] = {c: [] for c in cols}
    for tau in config.taus:
        traj = _run(config, tau=tau, perturbation=perturbation)
        t_end = float(traj.times[-1])
        err_state = float(np.linalg.norm(traj.states[-1] - np.asarray(ref_state(t_end))))
        errs = [err_state]
        for n in after:
            if len(traj.events) >= n and len(ref_times) >= n:
                errs.append(abs(traj.events[n - 1].t_hat - ref_times[n - 1]))
            else:
                errs.append(float("nan"))
        for c, e in zip(cols, errs):
            table[c].append(e)
        rows.append(["data", tau, len(traj.events)] + errs)
    taus = np.asarray(config.taus)
    summary = {"slope": [], "intercept": [], "r_squared": []}
    for c in cols:
        errs = np.asarray(table[c])
        ok = np.isfinite(errs) & (errs > 0)
        if int(ok.sum()) >= 3:
            est = estimate_order(taus[ok], errs[ok])
            summary["slope"].append(est.slope)
            summary["intercept"].append(est.intercept)
            summary["r_squared"].append(est.r_squared)
        else:
            for key in summary:
                summary[key].append(float("nan"))
    for kind in ("slope", "intercept", "r_squared"):
        rows.append([kind, "", ""] + summary[kind])
    path = f"{config.out}_order.csv"
    write_csv(path, ["kind", "tau", "n_events"] + cols, rows)
    return [path]


def cmd_perturb(config: ExperimentConfig) -> list[str]:
    """Sweep with the configured crossing-time perturbation (required)."""
    if config.perturbation is None:
        raise ConfigError("perturb needs perturbation.p (and optionally perturbation.c)")
    return cmd_sweep(config, perturbation=config.perturbation)


def cmd_conserve(config: ExperimentConfig) -> list[str]:
    """Conserved-quantity error of the conservative scheme vs rk2."""
    sys_ = config.system
    name = default_scheme_name(sys_)
    path = f"{config.out}_conserve.csv"
    header = ["t", "psi_error_dmm", "psi_error_rk2"]
    if round((config.T - config.t0) / config.tau) == 0:
        write_csv(path, header, [])
        return [path]
    traj_dmm = _run(config, scheme_names=(name, name), perturbation=None)
    traj_rk2 = _run(config, scheme_names=("rk2", "rk2"), perturbation=None)
    err_dmm = conserved_error_series(traj_dmm, sys_)
    err_rk2 = conserved_error_series(traj_rk2, sys_)
    rows = ([float(t), float(a), float(b)]
            for t, a, b in zip(traj_dmm.times, err_dmm, err_rk2))
    write_csv(path, header, rows)
    return [path]


def cmd_classify(config: ExperimentConfig, points: list[tuple]) -> list[str]:
    """Classify listed surface points; emit <out>_classify.csv."""
    sys_ = config.system
    d = sys_.dim
    rows = []
    for pt in points:
        x = np.asarray(pt, dtype=float)
        if x.size != d:
            raise ConfigError(f"point {pt!r} has {x.size} coordinates, expected {d}")
        gv = sys_.surface.value(x)
        base = [float(v) for v in x] + [gv]
        try:
            info = classify_interface_point(sys_, x)
            rows.append(base + [info.a_minus, info.a_plus, info.alpha_sq_hat,
                                info.kind.value, ""])
        except ValueError:
            rows.append(base + ["", "", "", "", "not_on_surface"])
        except PwsIntError as exc:
            rows.append(base + ["", "", "", "", type(exc).__name__])
    path = f"{config.out}_classify.csv"
    write_csv(path, [f"x_{i+1}" for i in range(d)]
              + ["g", "a_minus", "a_plus", "alpha_sq_hat", "classification", "error"],
              rows)
    return [path]


def _parse_points(values: list[str]) -> list[tuple]:
    pts = []
    for v in values:
        try:
            pts.append(_floats(v))
        except ValueError:
            raise ConfigError(f"bad point {v!r}; expected comma-separated floats") from None
    return pts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pwsint",
        description="Event-driven conservative integration of piecewise-smooth ODEs")
    parser.add_argument("command",
                        choices=["integrate", "sweep", "perturb", "conserve", "classify"])
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--out", default="pwsint", help="output path prefix")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration key")
    parser.add_argument("--point", dest="points", action="append", default=[],
                        metavar="X1,X2", help="surface point for classify (repeatable)")
    args = parser.parse_args(argv)

    try:
        kv = parse_kv_file(args.config) if args.config else {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            kv[key.strip()] = value.strip()
        config = build_config(kv, out=args.out)
        if args.command == "integrate":
            paths = cmd_integrate(config)
        elif args.command == "sweep":
            paths = cmd_sweep(config, perturbation=None)
        elif args.command == "perturb":
            paths = cmd_perturb(config)
        elif args.command == "conserve":
            paths = cmd_conserve(config)
        else:
            points = _parse_points(args.points or kv.get("points", "").split(";"))
            if not points or not any(points):
                raise ConfigError("classify needs at least one --point or a 'points' key")
            paths = cmd_classify(config, [p for p in points if p])
        for p in paths:
            print(p)
        return 0
    except (ConfigError, OSError) as exc:
        print(f"error: config: {exc}", file=_sys.stderr)
        return 2
    except (NumericalError, PwsIntError) as exc:
        print(f"error: numerical: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
