"""Command-line entry points.

Every command writes ``results.csv`` (``quantity,coordinate,lower,upper,status,seed``)
and ``manifest.json`` into ``--out``; ``simulate`` also writes ``data.csv``,
``ccp`` writes ``ccp.csv`` and ``bench`` writes ``bench.csv``.

Exit codes: 0 success, 2 the model rejects theta or the set is empty,
1 runtime error, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import re
import sys
import warnings
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .bench import BenchConfig, bench_compare
from .ccp import CCPTable, read_ccp, write_ccp
from .errors import GameError
from .family import build_family
from .game import GameSpec, logistic_grid
from .identification import (FEAS_TOL, SMOOTH_ALPHA, criterion_Q, find_feasible_point,
                             membership, projection_intervals)
from .inference import confidence_projections, fs_band, frequency_ccp
from .oracle import SelectionRule, read_dataset, simulate_dataset, write_dataset
from .specfile import fixture_path, load_game_spec

EXIT_OK, EXIT_ERROR, EXIT_REJECTED, EXIT_USAGE = 0, 1, 2, 64
COMMANDS = ("simulate", "ccp", "member", "point", "project", "confproject", "bench")
RESULT_HEADER = ["quantity", "coordinate", "lower", "upper", "status", "seed"]
NEEDS_SOURCE = {"ccp", "member", "point", "project", "confproject"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command needs; hashed into the manifest.

    The data source is exactly one of ``data_path``, ``ccp_path`` or a
    ``simulation`` block ``{theta0, selection, n, seed}``.
    """

    command: str
    spec_path: str
    out_dir: str = "."
    data_path: str | None = None
    ccp_path: str | None = None
    simulation: dict | None = None
    family: str = "abj"
    K: int | None = None
    alpha: float = 0.05
    omega_nodes: int = 0
    sigma_omega: str = "1.0"
    starts: int = 4
    tol: float = FEAS_TOL
    smooth_alpha: float = SMOOTH_ALPHA
    seed: int = 0
    threads: int = 1
    theta: list | None = None
    coords: list = field(default_factory=list)
    direction: list | None = None
    bounds: dict = field(default_factory=dict)
    bench: dict | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        sources = [s for s in (self.data_path, self.ccp_path, self.simulation) if s is not None]
        if self.command == "simulate":
            if self.data_path or self.ccp_path:
                raise UsageError("simulate takes a simulation block, not input files")
        elif self.command in NEEDS_SOURCE and len(sources) != 1:
            raise UsageError("give exactly one of --data, --ccp or a simulation (--n)")
        if self.command == "ccp" and self.ccp_path:
            raise UsageError("ccp estimates from --data or a simulation")
        for p in (self.spec_path, self.data_path, self.ccp_path):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"file not found: {p}")
        if self.command == "member" and self.theta is None:
            raise UsageError("member needs --theta")
        if self.starts < 1 or self.threads < 1 or self.omega_nodes < 0:
            raise UsageError("--starts and --threads must be >= 1, --omega-nodes >= 0")
        return self

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _family(text: str) -> str:
    if text in ("abj", "abj+lb", "sharp") or re.fullmatch(r"sharp\d+", text):
        return text
    raise argparse.ArgumentTypeError("family must be abj, abj+lb, sharp or sharpK (e.g. sharp2)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--spec", help="game-spec file (default: bundled two-firm entry game)")
    g.add_argument("--family", type=_family, default="abj",
                   help="inequality family: abj, abj+lb, sharp, or sharpK")
    g.add_argument("--K", type=int, help="largest event size for sharp families")
    g.add_argument("--bound", action="append", default=[], metavar="NAME=LO:HI",
                   help="override a parameter bound, e.g. delta1=-inf:0 (repeatable)")
    g.add_argument("--omega-nodes", type=int, default=0,
                   help="nodes of the common-shock grid (0: no mixing)")
    g.add_argument("--sigma-omega", default="1.0",
                   help="shock scale: a number, or a parameter name to estimate it")
    d = common.add_argument_group("data")
    d.add_argument("--data", help="market data CSV")
    d.add_argument("--ccp", help="CCP table CSV")
    d.add_argument("--n", type=int, help="simulate this many markets")
    d.add_argument("--theta0", type=_floats, help="true parameter for simulation")
    d.add_argument("--selection", choices=("uniform", "first-listed"), default="uniform")
    s = common.add_argument_group("solver")
    s.add_argument("--alpha", type=float, default=0.05, help="confidence level 1 - alpha")
    s.add_argument("--starts", type=int, default=4)
    s.add_argument("--tol", type=float, default=FEAS_TOL)
    s.add_argument("--smooth-alpha", type=float, default=SMOOTH_ALPHA)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default=".", help="output directory")

    parser = _Parser(prog="logitgame", description="Partial identification of entry games.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate market data")
    sub.add_parser("ccp", parents=[common], help="frequency CCP estimates")
    p = sub.add_parser("member", parents=[common], help="criterion and membership at theta")
    p.add_argument("--theta", type=_floats, required=True)
    sub.add_parser("point", parents=[common], help="find a point in the identified set")
    for name in ("project", "confproject"):
        p = sub.add_parser(name, parents=[common],
                           help="projection intervals of the " +
                                ("identified set" if name == "project" else "confidence set"))
        p.add_argument("--coord", action="append", default=[], help="parameter name or index")
        p.add_argument("--all-coords", action="store_true")
        p.add_argument("--direction", type=_floats, help="project onto p . theta")
    p = sub.add_parser("bench", parents=[common], help="projection vs grid-search timing")
    p.add_argument("--bins", type=_ints, default=[1, 10, 100, 1000])
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--grid-size", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=1)
    return parser


def _bounds(items) -> dict:
    out = {}
    for item in items:
        m = re.fullmatch(r"([^=]+)=([^:]*):(.*)", item)
        if not m:
            raise UsageError(f"--bound expects NAME=LO:HI, got {item!r}")
        try:
            out[m.group(1)] = [float(m.group(2) or "-inf"), float(m.group(3) or "inf")]
        except ValueError:
            raise UsageError(f"--bound expects numbers, got {item!r}") from None
    return out


def config_from_args(ns) -> RunConfig:
    spec_path = ns.spec or str(fixture_path("entry2.spec"))
    simulation = None
    if ns.n is not None or ns.command == "simulate":
        if ns.n is None:
            raise UsageError("simulate needs --n")
        if ns.n < 0:
            raise UsageError("--n must be non-negative")
        simulation = dict(theta0=ns.theta0, selection=ns.selection, n=ns.n, seed=ns.seed)
    coords = list(getattr(ns, "coord", []))
    if getattr(ns, "all_coords", False):
        coords = ["*"]
    bench = None
    if ns.command == "bench":
        bench = dict(bins=ns.bins, draws=ns.draws, grid_size=ns.grid_size, reps=ns.reps)
    cfg = RunConfig(ns.command, spec_path, ns.out, ns.data, ns.ccp, simulation, ns.family,
                    ns.K, ns.alpha, ns.omega_nodes, str(ns.sigma_omega), ns.starts, ns.tol,
                    ns.smooth_alpha, ns.seed, ns.threads, getattr(ns, "theta", None), coords,
                    getattr(ns, "direction", None), _bounds(ns.bound), bench)
    return cfg.validate()


# ---------------------------------------------------------------------------
# command execution
# ---------------------------------------------------------------------------

class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.rows: list = []
        self.files: list = []
        self.spec = self._spec()
        self.grid = self._grid()

    def _spec(self) -> GameSpec:
        spec = load_game_spec(self.cfg.spec_path)
        if not self.cfg.bounds:
            return spec
        lo, hi = spec.lower.copy(), spec.upper.copy()
        for name, (a, b) in self.cfg.bounds.items():
            j = self._param(spec, name)
            lo[j], hi[j] = a, b
        return spec.with_bounds(lo, hi)

    @staticmethod
    def _param(spec: GameSpec, name: str) -> int:
        if name in spec.param_names:
            return spec.param_names.index(name)
        if name.isdigit() and int(name) < spec.param_dim:
            return int(name)
        raise UsageError(f"unknown parameter {name!r}; have {list(spec.param_names)}")

    def _grid(self):
        if self.cfg.omega_nodes == 0:
            return None
        try:
            return logistic_grid(self.cfg.omega_nodes, float(self.cfg.sigma_omega))
        except ValueError:
            return logistic_grid(self.cfg.omega_nodes, 1.0,
                                 self._param(self.spec, self.cfg.sigma_omega))

    def family(self):
        kind, K = self.cfg.family, self.cfg.K
        if kind.startswith("sharp") and kind != "sharp":
            K = int(kind[5:])
            kind = "sharp"
        return build_family(self.spec, kind, K, self.grid)

    def simulate(self):
        sim = self.cfg.simulation
        theta0 = sim["theta0"] if sim["theta0"] is not None else [0.0] * self.spec.param_dim
        selection = SelectionRule(sim["selection"], tuple(self.spec.outcomes()))
        return simulate_dataset(self.spec, theta0, selection, sim["n"], grid=self.grid,
                                seed=sim["seed"], threads=self.cfg.threads)

    def ccp(self) -> CCPTable:
        if self.cfg.ccp_path:
            return read_ccp(self.cfg.ccp_path, self.spec)
        data = (read_dataset(self.cfg.data_path, self.spec) if self.cfg.data_path
                else self.simulate())
        return frequency_ccp(data, self.spec)

    def directions(self):
        spec, cfg = self.spec, self.cfg
        if cfg.direction is not None:
            if len(cfg.direction) != spec.param_dim:
                raise UsageError(f"--direction needs {spec.param_dim} entries")
            return ["p." + ",".join(repr(v) for v in cfg.direction)], [cfg.direction]
        if not cfg.coords:
            raise UsageError("give --coord, --all-coords or --direction")
        idx = (list(range(spec.param_dim)) if cfg.coords == ["*"]
               else [self._param(spec, c) for c in cfg.coords])
        return [spec.param_names[j] for j in idx], [np.eye(spec.param_dim)[j] for j in idx]

    def row(self, quantity, coordinate, lower, upper, status):
        self.rows.append([quantity, coordinate, _num(lower), _num(upper), status, self.cfg.seed])

    def write(self, name, writer):
        self.out.mkdir(parents=True, exist_ok=True)
        writer(self.out / name)
        self.files.append(name)

    def finish(self):
        def results(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(RESULT_HEADER)
                w.writerows(self.rows)
        self.write("results.csv", results)
        manifest = dict(command=self.cfg.command, config=asdict(self.cfg),
                        config_hash=self.cfg.digest(), seeds=dict(seed=self.cfg.seed),
                        versions=_versions(),
                        outputs={f: _sha256(self.out / f) for f in sorted(self.files)})
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                           sort_keys=True) + "\n")


def _num(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v + 0.0)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return dict(python=platform.python_version(), numpy=np.__version__,
                scipy=scipy.__version__, artifact=pkg)


def _pair_status(lo, hi) -> str:
    if lo.status == "infeasible" or hi.status == "infeasible":
        return "infeasible"
    if lo.ok and hi.ok:
        return "optimal"
    return lo.status if not lo.ok else hi.status


def _execute(cfg: RunConfig) -> int:
    run = _Run(cfg)
    spec, code = run.spec, EXIT_OK
    opts = dict(starts=cfg.starts, seed=cfg.seed, tol=cfg.tol, smooth_alpha=cfg.smooth_alpha,
                threads=cfg.threads)
    if cfg.command == "simulate":
        data = run.simulate()
        run.write("data.csv", lambda p: write_dataset(p, data, spec))
        run.row("markets", "", len(data), len(data), "ok")
    elif cfg.command == "ccp":
        table = run.ccp()
        run.write("ccp.csv", lambda p: write_ccp(p, table, spec))
        run.row("markets", "", table.n, table.n, "ok")
    elif cfg.command == "member":
        table, family = run.ccp(), run.family()
        q = criterion_Q(spec, cfg.theta, table, family)
        inside = membership(spec, cfg.theta, table, family)
        print(f"Q = {q:.6g}")
        print("member" if inside else "rejected")
        run.row("criterion", "", q, q, "member" if inside else "rejected")
        code = EXIT_OK if inside else EXIT_REJECTED
    elif cfg.command == "point":
        rep = find_feasible_point(spec, run.ccp(), run.family(), **opts)
        found = rep.ok and rep.objective <= cfg.tol
        status = "optimal" if found else ("infeasible" if rep.ok else rep.status)
        for name, v in zip(spec.param_names, rep.theta):
            run.row("feasible-point", name, v, v, status)
        run.row("criterion", "", rep.objective, rep.objective, status)
        print(f"theta = {np.array2string(rep.theta, precision=6)}  Q = {rep.objective:.6g}")
        code = EXIT_OK if found else EXIT_REJECTED
    elif cfg.command in ("project", "confproject"):
        labels, dirs = run.directions()
        table, family = run.ccp(), run.family()
        if cfg.command == "project":
            iv, reports = projection_intervals(spec, table, family, dirs, **opts)
            quantity = "identified-set"
        else:
            iv, reports = confidence_projections(spec, fs_band(table, cfg.alpha), family, dirs,
                                                 **opts)
            quantity = "confidence-set"
        statuses = [_pair_status(a, b) for a, b in reports]
        for name, (lo, hi), st in zip(labels, iv, statuses):
            run.row(quantity, name, lo, hi, st)
            print(f"{name}: [{_num(lo)}, {_num(hi)}]  {st}")
        if any(st == "infeasible" for st in statuses):
            code = EXIT_REJECTED
    elif cfg.command == "bench":
        b = cfg.bench
        table = bench_compare(BenchConfig(tuple(b["bins"]), b["draws"], b["grid_size"],
                                          b["reps"], cfg.starts, cfg.seed))
        print(table.format())

        def bench_csv(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["K", "abj_seconds", "sharp_seconds", "ct_eval_seconds",
                            "ct_seconds"])
                for r in table.rows:
                    w.writerow([r.K, _num(r.abj_seconds), _num(r.sharp_seconds),
                                _num(r.ct_eval_seconds), _num(r.ct_seconds)])
        run.write("bench.csv", bench_csv)
        for r in table.rows:
            run.row("seconds-abj", str(r.K), r.abj_seconds, r.abj_seconds, "ok")
            run.row("seconds-sharp", str(r.K), r.sharp_seconds, r.sharp_seconds, "ok")
            run.row("seconds-ct", str(r.K), r.ct_seconds, r.ct_seconds, "extrapolated")
    run.finish()
    return code


def run_command(argv=None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = config_from_args(ns)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _execute(cfg)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"logitgame: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"logitgame: error: {err.args[0] if len(err.args) == 1 else err}", file=sys.stderr)
        return EXIT_ERROR
    except (GameError, ValueError) as err:
        print(f"logitgame: error: {err}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
