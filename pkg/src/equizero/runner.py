"""Experiment configs, validation and execution.

A config is a TOML file, e.g.::

    experiment = "converge"
    seed = 1
    N = [25, 50, 100]
    output = "out/converge"
    domain = { kind = "circle", m = 1 }
    grid = { kind = "radii", radii = [1.5, 2.0, 3.0], points = 64 }

Every run writes its artifacts atomically into ``output`` and finishes with
``manifest.json`` listing SHA-256 digests of everything it wrote.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from equizero import __version__
from equizero import _parallel
from equizero.domain_models import KINDS, DomainModel, RegionSpec, sup_grid
from equizero.errors import ConfigError, EquizeroError
from equizero.orthopoly import build_basis, degree_cap, write_basis_csv
from equizero import orthopoly, sphere_scaling, szego, zero_ensembles

EXPERIMENTS = ("converge", "sandwich", "zeros", "density", "scaling", "bm", "su-flat")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    Ns: list
    output: Path
    domain: DomainModel | None = None
    m: int = 1
    trials: int = 1
    grid: dict = field(default_factory=dict)
    region: RegionSpec | None = None
    regions: list = field(default_factory=list)
    k: int | None = None
    epsilon: float = 0.1
    variant: str = "l2mu"
    u: dict = field(default_factory=dict)
    threads: int | None = None
    raw: dict = field(default_factory=dict)


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _as_list(value):
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def validate(raw: dict) -> list[str]:
    """Violations that would make ``run`` reject ``raw``; empty when the config is valid."""
    v = []
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        v.append(f"experiment: must be one of {', '.join(EXPERIMENTS)} (got {exp!r})")
    if "seed" not in raw:
        v.append("seed: required (no entropy default)")
    elif not isinstance(raw["seed"], int) or raw["seed"] < 0:
        v.append("seed: must be a non-negative integer")
    if "output" not in raw:
        v.append("output: required")

    dom = raw.get("domain")
    m = raw.get("m")
    model = None
    if exp not in ("scaling", "su-flat") or dom is not None:
        if not isinstance(dom, dict):
            v.append("domain: required block { kind = ..., m = ... }")
        else:
            kind = dom.get("kind")
            dm = dom.get("m", m if m is not None else 1)
            if kind not in KINDS and kind not in ("torus", "sphere", "disk", "disc"):
                v.append(f"domain.kind: unsupported {kind!r}")
            elif kind in ("circle", "interval", "disk", "disc") and dm != 1:
                v.append(f"domain: kind {kind!r} requires m = 1 (got m = {dm})")
            elif not isinstance(dm, int) or dm < 1:
                v.append("domain.m: must be a positive integer")
            else:
                model = DomainModel(kind, dm)
    if m is None:
        m = model.m if model else 1
    if not isinstance(m, int) or m < 1:
        v.append("m: must be a positive integer")
        m = 1
    if model is not None and model.m != m:
        v.append(f"m: {m} disagrees with domain.m = {model.m}")

    Ns = _as_list(raw.get("N"))
    if not Ns:
        v.append("N: at least one degree is required")
    cap = degree_cap(m)
    if exp == "zeros":
        cap = min(cap, zero_ensembles.COMPANION_CAP)
    for n in Ns:
        if not isinstance(n, int) or n < 1:
            v.append(f"N: degree {n!r} must be a positive integer")
        elif exp != "scaling" and n > cap:
            v.append(f"N: degree {n} exceeds the degree cap {cap} for m = {m}")
    if exp == "scaling" and m > 5:
        v.append("m: scaling profiles support m <= 5")

    if exp in ("zeros", "bm"):
        t = raw.get("trials")
        if not isinstance(t, int) or t < 1:
            v.append("trials: must be a positive integer")
    if exp == "zeros":
        if m != 1:
            v.append("m: zeros experiment requires m = 1")
        if raw.get("variant", "l2mu") not in ("l2mu", "su"):
            v.append("variant: must be 'l2mu' or 'su'")
        if "region" not in raw:
            v.append("region: required for zeros")
    if exp == "density":
        k = raw.get("k", m)
        if not isinstance(k, int) or not 1 <= k <= m:
            v.append(f"k: codimension must satisfy 1 <= k <= m = {m}")
    for key in ("region",):
        if key in raw:
            try:
                RegionSpec.from_config(raw[key])
            except (TypeError, ValueError, KeyError) as e:
                v.append(f"{key}: {e}")
    for i, blk in enumerate(raw.get("regions", [])):
        try:
            RegionSpec.from_config(blk)
        except (TypeError, ValueError, KeyError) as e:
            v.append(f"regions[{i}]: {e}")
    if exp == "sandwich" and model is not None and model.kind == "interval":
        if raw.get("grid", {}).get("kind", "random") != "real":
            v.append("grid.kind: sandwich on the interval needs a real grid (closed-form extremal function)")
    threads = raw.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        v.append("threads: must be a positive integer")
    return v


def parse(raw: dict) -> ExperimentConfig:
    violations = validate(raw)
    if violations:
        raise ConfigError(violations)
    dom = raw.get("domain")
    model = DomainModel.from_config({**dom, "m": dom.get("m", raw.get("m", 1))}) if dom else None
    m = raw.get("m", model.m if model else 1)
    return ExperimentConfig(
        experiment=raw["experiment"],
        seed=raw["seed"],
        Ns=sorted(_as_list(raw["N"])),
        output=Path(raw["output"]),
        domain=model,
        m=m,
        trials=raw.get("trials", 1),
        grid=dict(raw.get("grid", {})),
        region=RegionSpec.from_config(raw["region"]) if "region" in raw else None,
        regions=[RegionSpec.from_config(r) for r in raw.get("regions", [])],
        k=raw.get("k", m),
        epsilon=float(raw.get("epsilon", 0.1)),
        variant=raw.get("variant", "l2mu"),
        u=dict(raw.get("u", {})),
        threads=raw.get("threads"),
        raw=raw,
    )


# ---------------------------------------------------------------------------
# output helpers


def fmt(x) -> str:
    """Shortest round-trip representation, so reruns are byte-identical."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Outputs:
    def __init__(self, directory: Path):
        self.dir = Path(directory)
        self.files: list[Path] = []

    def _atomic(self, name: str, data: bytes) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        target = self.dir / name
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        if target not in self.files:
            self.files.append(target)
        return target

    def csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if not isinstance(x, str) else x for x in row])
        return self._atomic(name, buf.getvalue().encode())

    def json(self, name: str, obj) -> Path:
        return self._atomic(name, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())

    def from_writer(self, name: str, writer) -> Path:
        """Let a module writer produce the file, then move it into place."""
        with tempfile.TemporaryDirectory() as td:
            p = Path(td) / name
            writer(p)
            return self._atomic(name, p.read_bytes())


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str
    stages: dict
    outputs: list
    summary: dict

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "tool_version": self.version,
            "stages_wall_ms": self.stages,
            "outputs": self.outputs,
            "summary": self.summary,
        }


# ---------------------------------------------------------------------------
# grids


def make_grid(cfg: ExperimentConfig, model: DomainModel | None, m: int) -> np.ndarray:
    g = cfg.grid
    kind = g.get("kind", "random")
    n = int(g.get("points", 100))
    if kind == "radii":
        radii = g.get("radii", [1.5, 2.0, 3.0])
        theta = 2 * np.pi * np.arange(n) / n
        if m != 1:
            # points on the diagonal ray direction rotated by theta in the first coordinate
            base = np.full(m, 1 / math.sqrt(m), dtype=complex)
            pts = [r * base * np.r_[np.exp(1j * t), np.ones(m - 1)] for r in radii for t in theta]
            return np.array(pts)
        return np.array([r * np.exp(1j * t) for r in radii for t in theta]).reshape(-1, 1)
    if kind == "real":
        lo, hi = g.get("lo", -3.0), g.get("hi", 3.0)
        return np.linspace(lo, hi, n).reshape(-1, 1).astype(complex)
    if kind == "points":
        pts = np.array([[complex(a, b) for a, b in zip(p[0::2], p[1::2])] for p in g["values"]])
        return pts
    radius = float(g.get("radius", 3.0))
    exclusion = float(g.get("exclusion", 1e-3))
    if model is None:
        model = DomainModel("ball", m)
    return szego.default_grid(model, n, cfg.seed, radius=radius, exclusion=exclusion)


def _point_cols(m):
    cols = []
    for c in range(m):
        cols += [f"re_z{c + 1}", f"im_z{c + 1}"]
    return cols


def _point_vals(z):
    out = []
    for c in z:
        out += [c.real, c.imag]
    return out


# ---------------------------------------------------------------------------
# experiments


def _converge(cfg, out: Outputs, summary):
    model = cfg.domain
    grid = make_grid(cfg, model, model.m)
    with_phi = bool(cfg.raw.get("with_phi", model.kind != "interval"))
    table = szego.convergence_table(model, cfg.Ns, grid, with_phi=with_phi)
    head = ["N", "sup_dev_logkernel"] + (["sup_dev_phi"] if with_phi else [])
    out.csv("convergence.csv", head, table.rows())
    summary["sup_dev_logkernel"] = dict(zip(map(str, table.Ns), table.sup_dev_logkernel))
    devs = table.sup_dev_logkernel
    summary["strictly_decreasing"] = all(b < a for a, b in zip(devs, devs[1:]))


def _sandwich(cfg, out, summary):
    model = cfg.domain
    grid = make_grid(cfg, model, model.m)
    rows, failures = [], 0
    for N in cfg.Ns:
        field_ = szego.field_for(model, N)
        res = szego.sandwich_check(field_, model, grid, N)
        res = res if isinstance(res, list) else [res]
        for z, r in zip(grid, res):
            failures += not r.lower_ok
            rows.append([N, *_point_vals(z), r.log_ratio, r.lower_bound, r.lower_ok])
    out.csv("sandwich.csv", ["N", *_point_cols(model.m), "log_ratio", "lower_bound", "lower_ok"], rows)
    summary["lower_bound_failures"] = failures
    summary["points"] = len(rows)


def _zeros(cfg, out, summary):
    model = cfg.domain
    N = cfg.Ns[0]
    t0 = time.perf_counter()
    if cfg.variant == "su":
        ens = zero_ensembles.GaussianEnsemble.su(1, N, cfg.seed)
    else:
        ens = zero_ensembles.GaussianEnsemble.for_domain(model, N, cfg.seed)
    mass, samples = zero_ensembles.empirical_zero_mass(ens, cfg.region, cfg.trials, model=model, keep_samples=True)
    rows = ([s.trial, r.real, r.imag] for s in samples for r in s.roots)
    out.csv("roots.csv", ["trial", "re", "im"], rows)
    info = {
        "seed": cfg.seed,
        "N": N,
        "m": 1,
        "domain": model.to_config(),
        "variant": cfg.variant,
        "trials": cfg.trials,
        "region": cfg.region.to_config(),
        "mean_fraction": mass.mean_fraction,
        "std_error": mass.std_error,
        "wall_time_ms": round(1000 * (time.perf_counter() - t0), 3),
    }
    out.json("summary.json", info)
    summary.update(mean_fraction=mass.mean_fraction, std_error=mass.std_error)


def _density(cfg, out, summary):
    model = cfg.domain
    m = model.m if model else cfg.m
    grid = make_grid(cfg, model, m)
    step = cfg.raw.get("step")
    for N in cfg.Ns:
        basis = orthopoly.su_basis(m, N) if cfg.variant == "su" else build_basis(model, N)
        vals = zero_ensembles.expected_density(szego.KernelField(basis), grid, cfg.k, step)
        vals = np.atleast_1d(vals)
        out.csv(
            f"density_N{N}.csv",
            [*_point_cols(m), "k", "density"],
            ([*_point_vals(z), cfg.k, v] for z, v in zip(grid, vals)),
        )
    if cfg.regions and model is not None:
        rows = zero_ensembles.density_vs_equilibrium(model, cfg.Ns, cfg.regions)
        out.csv(
            "captured_mass.csv",
            ["N", "region", "captured", "equilibrium"],
            ([r.N, json.dumps(r.region.to_config(), sort_keys=True), r.captured, r.equilibrium] for r in rows),
        )
        summary["captured"] = [[r.N, r.captured] for r in rows]


def _scaling(cfg, out, summary):
    m = cfg.domain.m if cfg.domain else cfg.m
    U = float(cfg.u.get("U", 5.0))
    grid = sphere_scaling.default_u_grid(U, int(cfg.u.get("points", 101)))
    errs = {}
    for N in cfg.Ns:
        prof = sphere_scaling.scaling_profile(m, N, grid)
        out.csv(
            f"profile_N{N}.csv",
            ["u", "exact_scaled", "limit", "abs_err"],
            zip(prof.u_grid, prof.exact, prof.limit, prof.err),
        )
        out.json(f"profile_N{N}.json", prof.header())
        errs[str(N)] = prof.max_err
    summary["max_abs_err"] = errs


def _bm(cfg, out, summary):
    model = cfg.domain
    N = cfg.Ns[-1]
    basis = build_basis(model, N)
    res = int(cfg.grid.get("resolution", 4 * N + 8))
    grid = sup_grid(model, res)
    rep = orthopoly.bm_ratio(basis, grid, cfg.epsilon, cfg.trials, cfg.seed)
    out.json("bm.json", rep.to_json())
    out.from_writer("basis.csv", lambda p: write_basis_csv(basis, p))
    summary["estimated_C"] = rep.estimated_C


def _su_flat(cfg, out, summary):
    m = cfg.m
    model = DomainModel("ball", m)
    grid = make_grid(cfg, model, m)
    worst = 0.0
    rows = []
    for N in cfg.Ns:
        ratio = zero_ensembles.su_flatness(m, N, grid)
        worst = max(worst, float(np.abs(ratio - 1).max()))
        rows += [[N, *_point_vals(z), r] for z, r in zip(grid, ratio)]
    out.csv("su_flat.csv", ["N", *_point_cols(m), "ratio"], rows)
    summary["max_ratio_deviation"] = worst


_RUNNERS = {
    "converge": _converge,
    "sandwich": _sandwich,
    "zeros": _zeros,
    "density": _density,
    "scaling": _scaling,
    "bm": _bm,
    "su-flat": _su_flat,
}


class StageError(EquizeroError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def run(raw: dict) -> RunManifest:
    """Validate ``raw``, execute the experiment and write its manifest."""
    cfg = parse(raw)
    env = os.environ.get("EQUIZERO_THREADS")
    _parallel.set_workers(int(env) if env else cfg.threads)
    out = Outputs(cfg.output)
    stages, summary = {}, {}
    try:
        t0 = time.perf_counter()
        try:
            _RUNNERS[cfg.experiment](cfg, out, summary)
        except EquizeroError as e:
            raise StageError(cfg.experiment, e) from e
        stages[cfg.experiment] = round(1000 * (time.perf_counter() - t0), 3)
    finally:
        _parallel.set_workers(None)
    outputs = [{"path": p.name, "sha256": sha256(p)} for p in out.files]
    manifest = RunManifest(raw, __version__, stages, outputs, _jsonable(summary))
    out.json("manifest.json", manifest.to_json())
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
