"""Reproducible experiment runner: config parsing, seeding, CSV emission,
and figure-reproduction recipes.

Every run writes CSV files whose first line is a ``#`` comment carrying the
full configuration and code version; identical (config, seed) pairs produce
byte-identical output.  With ``--plot`` the same data is also rendered to PNG
next to the CSV.  Exit codes: 0 success, 1 usage error, 2 check failure,
3 resource limit.  ``ZRP_THREADS`` caps the replica worker pool.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import ensemble as ens
from . import kinetics as kin
from . import limits as lim
from . import partition as pt
from .model import ModelSpec, TailKind
from .rng import replica_generator

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_RESOURCE = 0, 1, 2, 3

STOCHASTIC_MODES = {"simulate", "sample", "tails", "recipe"}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    """Validated run description shared by all subcommands."""

    mode: str
    A: int = 2
    bulk_rates: tuple[float, ...] | None = None
    variant: str = "const"
    theta: float | None = None
    prefactor: float | None = None
    gamma: float | None = None
    theta_base: str = "L"
    L: int | None = None
    N: int | None = None
    rho: float | None = None
    geometry: str = "complete"
    events: int | None = None
    sim_time: float | None = None
    burnin: int | None = None
    samples: int = 100
    interval: int | None = None
    replicas: int = 1
    seed: int | None = None
    grid_max: float = 6.0
    grid_points: int = 121
    tail_scale: str = "cluster"
    phi_points: int = 200
    rho_min: float = 0.05
    rho_max: float = 2.0
    rho_points: int = 40
    out: str = "out"
    plot: bool = False
    mem_budget_mb: float = 4096.0
    empirical: str | None = None
    reference: str | None = None
    threshold: float = 0.05
    dump_configs: bool = False
    recipe: str | None = None

    def model_spec(self, size: int | None = None) -> ModelSpec:
        theta = self.theta
        if theta is None:
            base = size
            if base is None:
                base = self.L if self.theta_base == "L" else self.N
            if base is None:
                raise UsageError("cannot scale theta without a system size")
            theta = self.prefactor * float(base) ** self.gamma
        return ModelSpec(
            A=self.A,
            theta=theta,
            bulk_rates=self.bulk_rates or (),
            tail=TailKind.PD_RATIO if self.variant == "pd" else TailKind.CONSTANT_ONE,
        )

    def system(self) -> tuple[int, int]:
        if self.L is None:
            raise UsageError("missing lattice size --L")
        if self.N is not None:
            return self.L, self.N
        if self.rho is None:
            raise UsageError("need exactly one of --N or --rho")
        return self.L, int(round(self.rho * self.L))

    def meta(self) -> dict:
        cfg = {k: v for k, v in asdict(self).items() if v is not None}
        return {"tool": "fastzrp", "version": __version__, "config": cfg}


# -- parsing -------------------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--A", type=int, default=2, help="unstable threshold occupation")
    p.add_argument("--bulk-rates", type=str, default=None,
                   help="comma-separated rates g(1)..g(A-1); default all 1")
    p.add_argument("--variant", choices=("const", "pd"), default="const",
                   help="jump rates above A: constant 1 or n/(n-1)")
    p.add_argument("--theta", type=float, default=None, help="fast rate at occupation A")
    p.add_argument("--Theta", dest="prefactor", type=float, default=None,
                   help="prefactor of the fast-rate scaling Theta*size^gamma")
    p.add_argument("--gamma", type=float, default=None, help="fast-rate scaling exponent")
    p.add_argument("--theta-base", choices=("L", "N"), default="L",
                   help="system size that drives the fast-rate scaling")


def _add_system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--L", type=int, default=None, help="number of lattice sites")
    p.add_argument("--N", type=int, default=None, help="number of particles")
    p.add_argument("--rho", type=float, default=None, help="particle density N/L")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base seed (required for stochastic modes)")
    p.add_argument("--out", type=str, default="out", help="output directory")
    p.add_argument("--plot", action="store_true", help="also render PNG figures")
    p.add_argument("--mem-budget-mb", type=float, default=4096.0,
                   help="memory budget for exact tables before falling back")
    p.add_argument("--config", type=str, default=None,
                   help="JSON file with flag defaults (explicit flags win)")


def build_parser() -> _Parser:
    parser = _Parser(prog="fastzrp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("exact", help="currents, marginals and size-biased law from exact tables")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("--rho-max", type=float, default=2.0, help="current curve extends to this density")

    p = sub.add_parser("gc-curve", help="grand-canonical density and fugacity grids")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("--phi-points", type=int, default=200)
    p.add_argument("--rho-min", type=float, default=0.05)
    p.add_argument("--rho-max", type=float, default=2.0)
    p.add_argument("--rho-points", type=int, default=40)

    p = sub.add_parser("simulate", help="kinetic Monte Carlo runs with observables")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("--geometry", choices=("complete", "ring"), default="complete")
    p.add_argument("--events", type=int, default=None, help="event budget per replica")
    p.add_argument("--time", dest="sim_time", type=float, default=None, help="time budget per replica")
    p.add_argument("--burnin", type=int, default=None, help="burn-in events (default 100*L)")
    p.add_argument("--samples", type=int, default=100, help="snapshots per replica")
    p.add_argument("--interval", type=int, default=None, help="events between snapshots (default L)")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--grid-max", type=float, default=6.0)
    p.add_argument("--grid-points", type=int, default=121)
    p.add_argument("--tail-scale", choices=("cluster", "excess", "particles"), default="cluster")

    p = sub.add_parser("sample", help="exact canonical samples and per-sample observables")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("--samples", type=int, default=100, help="number of realizations")
    p.add_argument("--dump-configs", action="store_true", help="also write full configurations")

    p = sub.add_parser("tails", help="empirical tail curves from exact samples (KMC fallback)")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("--samples", type=int, default=100, help="number of realizations")
    p.add_argument("--grid-max", type=float, default=6.0)
    p.add_argument("--grid-points", type=int, default=121)
    p.add_argument("--tail-scale", choices=("cluster", "excess", "particles"), default="cluster")

    p = sub.add_parser("compare", help="KS distance of an emitted tail CSV against a reference law")
    _add_common_flags(p)
    p.add_argument("--empirical", type=str, required=True, help="tail CSV produced by this tool")
    p.add_argument("--reference", type=str, required=True,
                   help="one of: gamma21, exp, simplex:<L>, beta11")
    p.add_argument("--threshold", type=float, default=0.05, help="maximal accepted KS distance")
    p.add_argument("--rho", type=float, default=None, help="density override for gamma21")
    p.add_argument("--rho-c", dest="rho_c", type=float, default=None,
                   help="critical density override for gamma21")

    p = sub.add_parser("recipe", help="desk-scale reproduction of the reference experiments")
    for add in (_add_model_flags, _add_system_flags, _add_common_flags):
        add(p)
    p.add_argument("recipe", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    p.add_argument("--samples", type=int, default=None, help="override realization count")
    p.add_argument("--events", type=int, default=None, help="override KMC event budget")

    return parser


def parse_config(argv: list[str]) -> ExperimentConfig:
    """Parse flags (optionally seeded from a JSON config file) and validate."""
    parser = build_parser()
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise UsageError("--config needs a file path")
        try:
            loaded = json.loads(Path(argv[i + 1]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        injected: list[str] = []
        valid = {f for f in ExperimentConfig.__dataclass_fields__} | {"time"}
        for key, value in loaded.items():
            if key not in valid:
                raise UsageError(f"unknown config key {key!r}")
            if key == "prefactor":
                flag = "--Theta"
            elif key in ("sim_time", "time"):
                flag = "--time"
            else:
                flag = "--" + key.replace("_", "-")
            if isinstance(value, bool):
                if value:
                    injected.append(flag)
            else:
                injected.extend([flag, str(value)])
        # insert after the subcommand so explicit argv flags override
        argv = argv[:1] + injected + argv[1:]
    ns = parser.parse_args(argv)
    raw = vars(ns)
    raw.pop("config", None)
    if raw.get("bulk_rates"):
        try:
            raw["bulk_rates"] = tuple(float(x) for x in raw["bulk_rates"].split(","))
        except ValueError as exc:
            raise UsageError(f"bad --bulk-rates: {exc}") from exc
    known = set(ExperimentConfig.__dataclass_fields__)
    cfg = ExperimentConfig(**{k: v for k, v in raw.items() if k in known})
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.N is not None and cfg.rho is not None:
        raise UsageError("ConflictingDensitySpec: give exactly one of --N and --rho")
    if cfg.theta is not None and not cfg.theta > 0:
        raise UsageError(f"fast rate must be positive, got --theta {cfg.theta}")
    if cfg.gamma is not None and not cfg.gamma > 0:
        raise UsageError(f"scaling exponent must be positive, got --gamma {cfg.gamma}")
    if cfg.prefactor is not None and not cfg.prefactor > 0:
        raise UsageError(f"scaling prefactor must be positive, got --Theta {cfg.prefactor}")
    if (cfg.prefactor is None) != (cfg.gamma is None):
        raise UsageError("--Theta and --gamma must be given together")
    if cfg.mode in ("exact", "gc-curve", "simulate", "sample", "tails"):
        if cfg.theta is None and cfg.prefactor is None:
            raise UsageError("need --theta or --Theta/--gamma")
    if cfg.mode in STOCHASTIC_MODES and cfg.seed is None:
        raise UsageError(f"mode {cfg.mode!r} is stochastic and needs --seed")
    if cfg.mode == "compare" and cfg.reference is not None:
        name = cfg.reference.split(":")[0]
        if name not in ("gamma21", "exp", "simplex", "beta11"):
            raise UsageError(f"unknown reference {cfg.reference!r}")


# -- CSV helpers -----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, meta: dict, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_tail_csv(path: Path) -> tuple[dict, lim.TailCurve]:
    meta: dict = {}
    grid: list[float] = []
    values: list[float] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                try:
                    meta = json.loads(line[1:].strip())
                except json.JSONDecodeError:
                    pass
                continue
            parts = line.split(",")
            try:
                grid.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError:
                continue  # header row
    if not grid:
        raise UsageError(f"no data rows in {path}")
    return meta, lim.TailCurve(grid=np.asarray(grid), values=np.asarray(values))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ZRP_THREADS", "1")))
    except ValueError:
        return 1


_WORK: dict = {}


def _map_replicas(worker, n: int) -> list:
    threads = _threads()
    if threads <= 1 or n <= 1:
        return [worker(i) for i in range(n)]
    import multiprocessing as mp

    with mp.get_context("fork").Pool(processes=min(threads, n)) as pool:
        return pool.map(worker, range(n))


# -- exact sampling engines --------------------------------------------------------


def _sampling_engine(cfg: ExperimentConfig, spec: ModelSpec, L: int, N: int):
    """Pick the cheapest exact engine that fits the memory budget.

    Returns (kind, draw) where draw(rng) yields one configuration; kind is
    'table', 'split' or 'kmc' (the dynamics fallback, with a warning).
    """
    budget = int(cfg.mem_budget_mb * 2**20)
    table_bytes = (L + 1) * (N + 1) * 8
    if spec.tail is TailKind.CONSTANT_ONE and table_bytes <= budget:
        table = pt.build_table(spec, L, N, mem_budget_bytes=budget)
        return "table", lambda rng: pt.exact_canonical_sample(table, L, N, rng)
    if L & (L - 1) == 0:
        rows = pt.power_layers(spec, L, N)
        return "split", lambda rng: pt.split_sample(rows, L, N, rng)
    if spec.tail is not TailKind.CONSTANT_ONE and table_bytes <= budget:
        table = pt.build_table(spec, L, N, mem_budget_bytes=budget)
        return "table", lambda rng: pt.exact_canonical_sample(table, L, N, rng)
    print(
        f"warning: exact table for L={L}, N={N} exceeds the memory budget; "
        "falling back to kinetic Monte Carlo",
        file=sys.stderr,
    )
    geo = kin.Geometry(cfg.geometry, L)

    def draw(rng):
        out = kin.sample_stationary(spec, geo, N, rng=rng, n_samples=1)
        return out.samples[0]

    return "kmc", draw


def _sample_worker(i: int):
    return _WORK["draw"](replica_generator(_WORK["seed"], i))


def _draw_samples(cfg: ExperimentConfig, spec: ModelSpec, L: int, N: int) -> list[np.ndarray]:
    _, draw = _sampling_engine(cfg, spec, L, N)
    _WORK["draw"] = draw
    _WORK["seed"] = cfg.seed
    return _map_replicas(_sample_worker, cfg.samples)


# -- subcommands -------------------------------------------------------------------


def _mode_exact(cfg: ExperimentConfig) -> int:
    L, N = cfg.system()
    spec = cfg.model_spec()
    out = Path(cfg.out)
    n_hi = max(N, int(math.ceil(cfg.rho_max * L)))
    need = 4 * (n_hi + 1) * 8  # rolling rows only
    if need > cfg.mem_budget_mb * 2**20:
        raise MemoryError(f"rolling rows need {need} bytes, budget {cfg.mem_budget_mb} MB")
    row_below = pt.layer(spec, L - 1, n_hi)
    row_top = pt.layer_step(spec, row_below, spec.log_weights(n_hi))
    currents = pt.current_curve(row_top)
    meta = cfg.meta()
    write_csv(
        out / "currents.csv", meta, ["N", "rho", "current"],
        ((n, n / L, currents[n - 1]) for n in range(1, n_hi + 1)),
    )
    logw = spec.log_weights(n_hi)
    marg = np.exp(logw[: N + 1] + row_below[N::-1] - row_top[N])
    write_csv(out / "marginals.csv", meta, ["n", "probability"],
              ((n, marg[n]) for n in range(N + 1)))
    law = pt.size_biased_pmf_from_rows(spec, row_below, row_top, L, N)
    write_csv(out / "size_biased.csv", meta, ["n", "pmf"],
              ((n, law.pmf[n]) for n in range(N + 1)))
    if cfg.plot:
        from . import figures

        rho = np.arange(1, n_hi + 1) / L
        figures.save_current_curve(str(out / "currents.png"), rho, {L: currents}, {},
                                   title="canonical current")
    return EXIT_OK


def _mode_gc_curve(cfg: ExperimentConfig) -> int:
    if cfg.L is None:
        raise UsageError("missing lattice size --L")
    spec = cfg.model_spec(size=cfg.L)
    out = Path(cfg.out)
    meta = cfg.meta()
    phi = np.linspace(0.0, 0.999, cfg.phi_points)
    dens = np.array([ens.density_of_fugacity(spec, p) for p in phi])
    dens_inf = np.array([ens.density_limit(spec, p) for p in phi])
    write_csv(out / "density_vs_fugacity.csv", meta,
              ["phi", "density", "density_limit"], zip(phi, dens, dens_inf))
    rho = np.linspace(cfg.rho_min, cfg.rho_max, cfg.rho_points)
    rc = ens.critical_density(spec)
    fug = np.array([ens.solve_fugacity(spec, r).phi for r in rho])
    fug_inf = np.array([_limit_fugacity(spec, r, rc) for r in rho])
    write_csv(out / "fugacity_vs_density.csv", meta,
              ["rho", "fugacity", "fugacity_limit"], zip(rho, fug, fug_inf))
    if cfg.plot:
        from . import figures

        figures.save_gc_panels(str(out / "gc_curves.png"), phi, {cfg.L: dens}, dens_inf,
                               rho, {cfg.L: fug}, {}, fug_inf)
    return EXIT_OK


def _limit_fugacity(spec: ModelSpec, rho: float, rho_c: float) -> float:
    if rho >= rho_c:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ens.density_limit(spec, mid) < rho:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tail_grid_and_scale(cfg: ExperimentConfig, spec: ModelSpec, L: int, N: int) -> tuple[np.ndarray, float]:
    grid = np.linspace(0.0, cfg.grid_max, cfg.grid_points)
    rho = N / L
    if cfg.tail_scale == "cluster":
        scale = ens.cluster_scale(spec, rho)
    elif cfg.tail_scale == "excess":
        scale = (rho - ens.critical_density(spec)) * L
    else:
        scale = float(N)
    return grid, scale


def _write_tails(cfg, out: Path, meta: dict, samples: list[np.ndarray], spec, L: int, N: int) -> None:
    grid, scale = _tail_grid_and_scale(cfg, spec, L, N)
    sb = kin.empirical_sb_tail(samples, scale, grid)
    write_csv(out / "sb_tail.csv", {**meta, "scale": scale}, ["u", "survival"],
              zip(sb.grid, sb.values))
    curves = {"size-biased": sb}
    try:
        cl = kin.cluster_tail(samples, spec.A, scale, grid)
        write_csv(out / "cluster_tail.csv", {**meta, "scale": scale}, ["u", "survival"],
                  zip(cl.grid, cl.values))
        curves["cluster sites"] = cl
    except ValueError:
        print("warning: no cluster sites; cluster tail not written", file=sys.stderr)
    if cfg.plot:
        from . import figures

        figures.save_tails(str(out / "tails.png"), curves)


def _mode_tails(cfg: ExperimentConfig) -> int:
    L, N = cfg.system()
    spec = cfg.model_spec()
    out = Path(cfg.out)
    samples = _draw_samples(cfg, spec, L, N)
    _write_tails(cfg, out, cfg.meta(), samples, spec, L, N)
    return EXIT_OK


def _mode_sample(cfg: ExperimentConfig) -> int:
    L, N = cfg.system()
    spec = cfg.model_spec()
    out = Path(cfg.out)
    samples = _draw_samples(cfg, spec, L, N)
    meta = cfg.meta()
    rows = []
    rng_pick = replica_generator(cfg.seed, 1 << 20)  # separate stream for picks
    for i, c in enumerate(samples):
        M, xs = kin.max_site(c)
        rows.append((i, M, len(xs), min(xs), kin.cluster_count(c, spec.A),
                     pt.size_biased_pick(c, rng_pick)))
    write_csv(out / "summary.csv", meta,
              ["sample", "max_occupation", "n_max_sites", "first_max_site",
               "cluster_sites", "size_biased_pick"], rows)
    if cfg.dump_configs:
        write_csv(out / "configs.csv", meta, ["sample", "site", "occupation"],
                  ((i, x, int(c[x])) for i, c in enumerate(samples) for x in range(L)))
    return EXIT_OK


def _simulate_worker(i: int):
    cfg: ExperimentConfig = _WORK["cfg"]
    spec, geo, N = _WORK["spec"], _WORK["geo"], _WORK["N"]
    rng = replica_generator(cfg.seed, i)
    if cfg.sim_time is not None:
        state = kin.run(spec, geo, kin.uniform_configuration(geo.L, N),
                        rng=rng, max_time=cfg.sim_time)
        return kin.SampleRun([state.configuration], np.array([state.time]),
                             np.array([state.events]), state)
    return kin.sample_stationary(
        spec, geo, N, rng=rng, n_samples=cfg.samples,
        burnin_events=cfg.burnin, interval_events=cfg.interval)


def _mode_simulate(cfg: ExperimentConfig) -> int:
    L, N = cfg.system()
    spec = cfg.model_spec()
    geo = kin.Geometry(cfg.geometry, L)
    out = Path(cfg.out)
    meta = cfg.meta()
    n_rep = max(1, cfg.replicas)
    _WORK.update(spec=spec, geo=geo, N=N, cfg=cfg)
    runs = _map_replicas(_simulate_worker, n_rep)
    write_csv(out / "profiles.csv", meta, ["replica", "site", "integrated_occupation"],
              ((r, x + 1, int(v)) for r, run_ in enumerate(runs)
               for x, v in enumerate(kin.integrated_profile(run_.samples[-1]))))
    rows = []
    for r, run_ in enumerate(runs):
        for j, c in enumerate(run_.samples):
            M, xs = kin.max_site(c)
            rows.append((r, j, run_.times[j], int(run_.events[j]), M, len(xs), min(xs),
                         kin.cluster_count(c, spec.A)))
    write_csv(out / "summary.csv", meta,
              ["replica", "sample", "time", "events", "max_occupation",
               "n_max_sites", "first_max_site", "cluster_sites"], rows)
    rho = N / L
    if rho > ens.critical_density(spec):
        samples = [c for run_ in runs for c in run_.samples]
        _write_tails(cfg, out, meta, samples, spec, L, N)
    if cfg.plot:
        from . import figures

        profs = {f"replica {r}": kin.integrated_profile(run_.samples[-1])
                 for r, run_ in enumerate(runs)}
        figures.save_profiles(str(out / "profiles.png"), profs,
                              ens.critical_density(spec))
    return EXIT_OK


def _reference_cdf(cfg: ExperimentConfig, meta: dict):
    name = cfg.reference
    if name == "exp":
        return lambda u: 1.0 - lim.exponential_cluster_tail(u)
    if name == "beta11":
        return lambda u: 1.0 - lim.beta11_tail(u)
    if name.startswith("simplex:"):
        L = int(name.split(":", 1)[1])
        return lambda u: lim.simplex_marginal_cdf(np.clip(u, 0.0, 1.0), L)
    if name == "gamma21":
        rho, rho_c = cfg.rho, getattr(cfg, "rho_c", None)
        conf = meta.get("config", {})
        if rho is None:
            rho = conf.get("rho")
            if rho is None and conf.get("N") and conf.get("L"):
                rho = conf["N"] / conf["L"]
        if rho_c is None and conf.get("A"):
            spec = ModelSpec(A=int(conf["A"]), theta=1.0,
                             bulk_rates=tuple(conf.get("bulk_rates") or ()))
            rho_c = ens.critical_density(spec)
        if rho is None or rho_c is None:
            raise UsageError("gamma21 reference needs --rho/--rho-c or CSV metadata")
        return lambda u: lim.gamma21_mixture_cdf(u, rho, rho_c)
    raise UsageError(f"unknown reference {name!r}")


def _mode_compare(cfg: ExperimentConfig) -> int:
    meta, curve = read_tail_csv(Path(cfg.empirical))
    cdf = _reference_cdf(cfg, meta)
    d = lim.ks_distance(curve, cdf)
    ok = d <= cfg.threshold
    print(f"KS distance {d:.6f} vs {cfg.reference}: "
          f"{'PASS' if ok else 'FAIL'} (threshold {cfg.threshold})")
    return EXIT_OK if ok else EXIT_CHECK


# -- figure recipes -----------------------------------------------------------------


def _recipe_fig1(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out) / "fig1"
    sizes = (64, 256, 1024)
    phi = np.linspace(0.0, 0.995, 160)
    rho = np.linspace(0.05, 2.0, 40)
    dens_by, fug_by, cur_by = {}, {}, {}
    spec0 = ModelSpec(A=cfg.A, theta=1.0, bulk_rates=cfg.bulk_rates or ())
    for L in sizes:
        spec = ModelSpec(A=cfg.A, theta=float(L), bulk_rates=cfg.bulk_rates or (),
                         tail=TailKind.CONSTANT_ONE)
        dens_by[L] = np.array([ens.density_of_fugacity(spec, p) for p in phi])
        fug_by[L] = np.array([ens.solve_fugacity(spec, r).phi for r in rho])
        row = pt.layer(spec, L, int(math.ceil(rho[-1] * L)))
        cur = pt.current_curve(row)
        cur_by[L] = np.array([cur[int(round(r * L)) - 1] for r in rho])
    dens_inf = np.array([ens.density_limit(spec0, p) for p in phi])
    rc = ens.critical_density(spec0)
    fug_inf = np.array([_limit_fugacity(spec0, r, rc) for r in rho])
    meta = cfg.meta()
    write_csv(out / "density_vs_fugacity.csv", meta,
              ["phi"] + [f"density_L{L}" for L in sizes] + ["density_limit"],
              zip(phi, *[dens_by[L] for L in sizes], dens_inf))
    write_csv(out / "currents_vs_density.csv", meta,
              ["rho"] + [f"fugacity_L{L}" for L in sizes]
              + [f"current_L{L}" for L in sizes] + ["fugacity_limit"],
              zip(rho, *[fug_by[L] for L in sizes], *[cur_by[L] for L in sizes], fug_inf))
    if cfg.plot:
        from . import figures

        figures.save_gc_panels(str(out / "fig1.png"), phi, dens_by, dens_inf,
                               rho, fug_by, cur_by, fug_inf)
    return EXIT_OK


def _recipe_fig2(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out) / "fig2"
    L = cfg.L or 1024
    events = cfg.events or 4_000_000
    meta = cfg.meta()
    profiles = {}
    for A, rhos in ((2, (1.0,)), (5, (1.0, 3.0, 4.0))):
        for rho in rhos:
            for Theta in (0.1, 1.0, 10.0):
                spec = ModelSpec(A=A, theta=Theta * L)
                N = int(round(rho * L))
                geo = kin.Geometry("complete", L)
                rng = replica_generator(cfg.seed, hash((A, rho, Theta)) % (1 << 30))
                state = kin.run(spec, geo, kin.uniform_configuration(L, N),
                                rng=rng, max_events=events)
                label = f"A{A}_rho{rho:g}_Theta{Theta:g}"
                profiles[label] = kin.integrated_profile(state.configuration)
                write_csv(out / f"profile_{label}.csv", {**meta, "A": A, "rho": rho, "Theta": Theta},
                          ["site", "integrated_occupation"],
                          ((x + 1, int(v)) for x, v in enumerate(profiles[label])))
    if cfg.plot:
        from . import figures

        a5 = {k: v for k, v in profiles.items() if k.startswith("A5")}
        figures.save_profiles(str(out / "fig2.png"), a5, bulk_slope=2.0,
                              title=f"integrated profiles, L={L}")
    return EXIT_OK


def _recipe_fig3(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out) / "fig3"
    reps = cfg.samples or 50
    for A, rho, L in ((2, 1.0, cfg.L or 4096), (5, 3.0, cfg.L or 4096)):
        spec = ModelSpec(A=A, theta=float(L))
        sub = ExperimentConfig(mode="tails", A=A, theta=float(L), L=L, rho=rho,
                               samples=reps, seed=cfg.seed, out=str(out / f"A{A}"),
                               plot=cfg.plot, grid_max=6.0, grid_points=121,
                               mem_budget_mb=cfg.mem_budget_mb)
        _mode_tails(sub)
    return EXIT_OK


def _recipe_fig4(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out) / "fig4"
    N = cfg.N or 8192
    reps = cfg.samples or 100
    meta = cfg.meta()
    # condensing side: single macroscopic maximum
    spec = ModelSpec(A=cfg.A, theta=float(N) ** 2)
    rows = []
    for L in (8, 16):
        table = pt.build_table(spec, L, N)
        for i in range(reps):
            c = pt.exact_canonical_sample(table, L, N, replica_generator(cfg.seed, (L << 16) + i))
            M, xs = kin.max_site(c)
            rows.append((L, i, M / N, len(xs), min(xs)))
    write_csv(out / "condensing_maxima.csv", meta,
              ["L", "sample", "max_fraction", "n_max_sites", "first_max_site"], rows)
    # spread side: simplex marginals
    spec = ModelSpec(A=cfg.A, theta=math.sqrt(N))
    grid = np.linspace(0.0, 1.0, 101)
    curves = {}
    for L in (2, 4, 8):
        table = pt.build_table(spec, L, N)
        vals = np.concatenate([
            pt.exact_canonical_sample(table, L, N, replica_generator(cfg.seed, (L << 20) + i))
            for i in range(reps)
        ]) / N
        vs = np.sort(vals)
        idx = np.searchsorted(vs, grid, side="right")
        curves[L] = lim.TailCurve(grid=grid, values=(vs.size - idx) / vs.size)
        write_csv(out / f"mass_fraction_tail_L{L}.csv", {**meta, "L": L},
                  ["u", "survival"], zip(grid, curves[L].values))
    if cfg.plot:
        from . import figures

        figures.save_tails(str(out / "fig4.png"),
                           {f"L={L}": c for L, c in curves.items()},
                           xlabel="occupation / N", title="fixed volume, spread regime")
    return EXIT_OK


def _recipe_fig5(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out) / "fig5"
    L = cfg.L or 2048
    reps = cfg.samples or 200
    meta = cfg.meta()
    spec = ModelSpec(A=cfg.A, theta=float(L), tail=TailKind.PD_RATIO)
    n_hi = 3 * L
    row = pt.layer(spec, L, n_hi)
    cur = pt.current_curve(row)
    rho = np.arange(1, n_hi + 1) / L
    gc = np.array([ens.solve_fugacity(spec, r).phi for r in rho])
    write_csv(out / "currents.csv", meta, ["rho", "canonical_current", "grand_canonical"],
              zip(rho, cur, gc))
    rows = pt.power_layers(spec, L, L)
    samples = [pt.split_sample(rows, L, L, replica_generator(cfg.seed, i)) for i in range(reps)]
    grid = np.linspace(0.0, 1.0, 101)
    rc = ens.critical_density(spec)
    scale = (1.0 - rc) * L
    sb = kin.empirical_sb_tail(samples, scale, grid)
    write_csv(out / "sb_tail.csv", {**meta, "scale": scale}, ["u", "survival"],
              zip(sb.grid, sb.values))
    if cfg.plot:
        from . import figures

        figures.save_current_curve(str(out / "fig5_current.png"), rho, {L: cur}, {L: gc},
                                   plateau=1.0, title="ratio-tail currents")
        figures.save_tails(str(out / "fig5_tail.png"), {"size-biased": sb},
                           reference=lim.beta11_tail, reference_label="uniform",
                           logy=False, xlabel="occupation / excess mass")
    return EXIT_OK


_RECIPES = {"fig1": _recipe_fig1, "fig2": _recipe_fig2, "fig3": _recipe_fig3,
            "fig4": _recipe_fig4, "fig5": _recipe_fig5}

_MODES = {
    "exact": _mode_exact,
    "gc-curve": _mode_gc_curve,
    "simulate": _mode_simulate,
    "sample": _mode_sample,
    "tails": _mode_tails,
    "compare": _mode_compare,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Dispatch a validated config; returns the process exit code."""
    if cfg.mode == "recipe":
        return _RECIPES[cfg.recipe](cfg)
    return _MODES[cfg.mode](cfg)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return run_experiment(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MemoryError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
