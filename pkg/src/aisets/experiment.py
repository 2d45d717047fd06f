"""
Experiment configs, grid runners and artifact writers behind the ``aisets``
command.

A config is one JSON object. Every emitted file carries the SHA-256 of the
canonical config text and the seed, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .aligned import expected_set_size, partition_into_aligned_sets, toy_distinct_images
from .channel import (DEFAULT_M, CanonicalChannel, ChannelDensity, CsitState,
                      DegenerateDensityError, GeneralChannel2x2, UserCsit,
                      reduce_to_canonical)
from .deterministic import IntegerCodebook, ceil_sqrt
from .entropy import assemble_sum_dof_bound, difference_of_entropies, minimize_over_mappings
from .schemes import bia_curve, default_prior, zf_curve

SUBCOMMANDS = ("canonical-reduce", "enumerate-sets", "bound-check", "entropy-grid",
               "scheme-zf", "scheme-bia", "toy")

DEFAULTS = {
    "users": 2,
    "M": DEFAULT_M,
    "P": [100, 1000, 10000],
    "n": [1, 2],
    "density": {"family": "uniform", "lo": 0.5, "hi": 2.0},
    "csit": ["perfect", "density"],
    "correlation": {"rho": 0.0},
    "codebook_size": 8,
    "samples": 20000,
    "seed": 0,
}


class ConfigError(ValueError):
    """Config text or contents violate the schema (usage error)."""


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Config xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict
    seed: int

    @property
    def text(self):
        """Canonical JSON of the effective config (hash input)."""
        return json.dumps({"subcommand": self.subcommand, **self.params, "seed": self.seed},
                          sort_keys=True, separators=(",", ":"))

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def density(self, P=None):
        """The user-2 channel law at power ``P``."""
        spec = dict(self.params["density"])
        if spec.get("family") == "scaled_uniform":
            return ChannelDensity.scaled_uniform(float(spec.get("center", 1.0)),
                                                 float(spec.get("alpha", 0.0)), float(P),
                                                 float(spec.get("C", 1.0)))
        return ChannelDensity.from_spec(spec, P)

    def csit(self):
        users = []
        for kind in self.params["csit"]:
            users.append(UserCsit("perfect") if kind == "perfect"
                         else UserCsit("density", self.density()))
        return CsitState(users)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def parse_config(subcommand, text: Optional[str] = None, seed: Optional[int] = None):
    """
    Parse and validate a config. Raises :class:`ConfigError` on malformed
    JSON or schema violations, before anything touches the disk.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    raw = {}
    if text is not None:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    params = {**DEFAULTS, **raw}
    params.pop("subcommand", None)
    s = params.pop("seed")
    if seed is not None:
        s = seed
    if not isinstance(s, int) or s < 0:
        raise ConfigError("seed must be a nonnegative integer")
    params["P"] = _as_list(params["P"])
    params["n"] = _as_list(params["n"])
    try:
        if not all(float(P) > 1 for P in params["P"]):
            raise ConfigError("every P must exceed 1")
        if not all(isinstance(n, int) and n >= 1 for n in params["n"]):
            raise ConfigError("n values must be positive integers")
        if not float(params["M"]) > 1:
            raise ConfigError("M must exceed 1")
        if int(params["users"]) < 2 or len(params["csit"]) != int(params["users"]):
            raise ConfigError("csit needs one entry per user, with at least two users")
        if any(c not in ("perfect", "density") for c in params["csit"]):
            raise ConfigError("csit entries must be 'perfect' or 'density'")
        rho = float(params["correlation"].get("rho", 0.0))
        if not -1 < rho < 1:
            raise ConfigError("correlation.rho must lie in (-1, 1)")
        if not isinstance(params["density"], dict) or "family" not in params["density"]:
            raise ConfigError("density must be an object with a 'family'")
        cfg = ExperimentConfig(subcommand, params, s)
        cfg.density(float(params["P"][0]))          # validates the family eagerly
    except DegenerateDensityError as exc:
        raise ConfigError(f"density rejected: {exc}") from None
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None
    return cfg


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Results xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class ExperimentResult:
    name: str
    rows: list
    summary: dict = field(default_factory=dict)
    falsified: list = field(default_factory=list)     # serializable instances
    message: str = ""


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return "" if v is None else str(v)


def csv_text(rows, cfg: ExperimentConfig):
    buf = io.StringIO()
    buf.write(f"# aisets config={cfg.digest} seed={cfg.seed}\n")
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def json_text(obj, cfg: ExperimentConfig):
    doc = {"provenance": {"config_sha256": cfg.digest, "seed": cfg.seed,
                          "config": json.loads(cfg.text)}, **obj}
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def write_result(res: ExperimentResult, cfg: ExperimentConfig, out_dir):
    """Write ``<name>.csv`` and ``<name>.json``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p = os.path.join(out_dir, f"{res.name}.csv")
    with open(p, "w", newline="") as fh:
        fh.write(csv_text(res.rows, cfg))
    paths.append(p)
    p = os.path.join(out_dir, f"{res.name}.json")
    with open(p, "w") as fh:
        fh.write(json_text({"summary": res.summary}, cfg))
    paths.append(p)
    return paths


def write_falsification(res: ExperimentResult, cfg: ExperimentConfig, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    p = os.path.join(out_dir, "falsification.json")
    with open(p, "w") as fh:
        fh.write(json_text({"instances": res.falsified}, cfg))
    return p


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Runners xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _grid_map(fn: Callable, cells: list, seed: int, threads: int):
    """Apply ``fn(cell, rng)`` over cells with one spawned stream per cell, in order."""
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(cells))]
    if threads <= 1:
        return [fn(c, r) for c, r in zip(cells, rngs)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, cells, rngs))


def random_codebook(P, n, size, rng, mapping="random"):
    """Distinct user-1 rows over ``{0..ceil(sqrt P)}^n`` with a user-2 table."""
    Q = ceil_sqrt(P)
    size = min(int(size), (Q + 1) ** n)
    flat = rng.choice((Q + 1) ** n, size=size, replace=False)
    x1 = np.stack(np.unravel_index(np.sort(flat), (Q + 1,) * n), axis=1).astype(np.int64)
    x2 = rng.integers(0, Q + 1, size=x1.shape) if mapping == "random" else np.zeros_like(x1)
    return IntegerCodebook.two_user(x1, x2, P)


def _codebook_from_config(cfg, P, n, rng):
    if "codebook" in cfg.params:
        cb = IntegerCodebook.from_dict(cfg["codebook"])
        return cb
    return random_codebook(P, n, cfg["codebook_size"], rng, cfg.get("mapping", "random"))


def run_canonical_reduce(cfg, threads=1):
    g = cfg.get("channel", {"G": [[[1.0, 0.5], [2.0, 1.5]]]})
    if "G" not in g:
        raise ConfigError("canonical-reduce needs 'channel': {'G': [[[g11,g12],[g21,g22]], ...]}")
    gen = GeneralChannel2x2(np.asarray(g["G"], dtype=float), float(cfg["M"]),
                            float(g.get("P_tilde", cfg["P"][0])))
    can, tr = reduce_to_canonical(gen)
    G = can.gain(1, 0)
    rows = [{"t": t + 1, "G": float(G[t])} for t in range(can.n)]
    return ExperimentResult("canonical_reduce", rows, {
        "M_canonical": can.M, "P_canonical": can.P, "G": G.tolist(),
        "power_gain": tr.power_gain().tolist()})


def run_enumerate_sets(cfg, threads=1):
    rng = np.random.default_rng(cfg.seed)
    P, n = float(cfg["P"][0]), int(cfg["n"][0])
    cb = _codebook_from_config(cfg, P, n, rng)
    d = cfg.density(P)
    realizations = cfg.get("realizations", 3)
    rows = []
    for r in range(realizations):
        g = d.sample_sequence(rng, cb.n, rho=float(cfg["correlation"].get("rho", 0.0)))
        ch = CanonicalChannel.two_user(g, M=float(cfg["M"]), P=P, check=False)
        for sid, s in enumerate(partition_into_aligned_sets(cb, ch)):
            rows.append({"realization": r, "set": sid, "size": len(s),
                         "members": list(map(int, s.members)), "image": list(map(int, s.image)),
                         "G": g.tolist()})
    return ExperimentResult("enumerate_sets", rows, {"codebook": cb.to_dict(),
                                                     "realizations": realizations})


def run_bound_check(cfg, threads=1):
    cells = [(float(P), int(n)) for P in cfg["P"] for n in cfg["n"]]
    rho = float(cfg["correlation"].get("rho", 0.0))

    def one(cell, rng):
        P, n = cell
        cb = _codebook_from_config(cfg, P, n, rng)
        rep = expected_set_size(cb, cfg.density(P), cfg["samples"], rng, rho=rho)
        return cb, rep

    out = _grid_map(one, cells, cfg.seed, threads)
    rows, bad = [], []
    for (P, n), (cb, rep) in zip(cells, out):
        rows.append({"P": P, "n": n, "N": cb.N, "empirical_E_S": rep.empirical_expected_size,
                     "stderr": rep.empirical_stderr, "exact_E_S": rep.exact_expected_size,
                     "analytic_bound": rep.analytic_bound,
                     "max_pair_bound": float(rep.pairwise_bounds.max()),
                     "falsified": rep.falsified})
        if rep.falsified:
            bad.append({"codebook": cb.to_dict(), "report": rep.to_dict()})
    return ExperimentResult("bound_check", rows, {"cells": len(cells), "falsified": len(bad)},
                            bad)


def run_entropy_grid(cfg, threads=1):
    cells = [(float(P), int(n)) for P in cfg["P"] for n in cfg["n"]]
    rho = float(cfg["correlation"].get("rho", 0.0))
    search = bool(cfg.get("search", False))

    def one(cell, rng):
        P, n = cell
        d = cfg.density(P)
        cb = _codebook_from_config(cfg, P, n, rng)
        if search:
            res = minimize_over_mappings(cb.x(0), d, range(cb.Q + 1), P, rng=rng)
            cb = cb.with_mapping(res.mapping)
        return cb, difference_of_entropies(cb, d, rng=rng, rho=rho)

    out = _grid_map(one, cells, cfg.seed, threads)
    rows, bad, ledgers = [], [], []
    for (P, n), (cb, led) in zip(cells, out):
        ledgers.append(led)
        viol = led.check()
        rows.append({"P": P, "n": n, "alpha": led.alpha, "H1": led.H_Y1, "H2": led.H_Y2,
                     "H1_given_H2": led.H_Y1_given_Y2, "E_log_S": led.E_log_S,
                     "log_E_S": led.log_E_S, "diff": led.difference,
                     "normalized_diff": led.D_hat, "method": led.method,
                     "violations": ";".join(viol)})
        if viol:
            bad.append({"codebook": cb.to_dict(), "ledger": led.to_dict(), "violations": viol})
    summary = {"cells": len(cells)}
    Ps = {l.P for l in ledgers}
    if len(Ps) >= 3:
        for n in sorted({l.n for l in ledgers}):
            sub = [l for l in ledgers if l.n == n]
            if len({l.P for l in sub}) >= 3:
                rep = assemble_sum_dof_bound(sub, [sub[0].alpha])
                summary[f"n={n}"] = {"theorem_value": rep.theorem_value,
                                     "limit_log_E_S": rep.fitted_limit_log_E_S,
                                     "limit_analytic": rep.fitted_limit_analytic,
                                     "above_alpha_informational": rep.above_alpha}
    return ExperimentResult("entropy_grid", rows, summary, bad)


def run_scheme_zf(cfg, threads=1):
    alphas = _as_list(cfg.get("alphas", [0.0, 0.25, 0.5, 0.75, 1.0]))
    Ps = [float(p) for p in cfg.get("scheme_P", [10.0 ** k for k in range(6, 19)])]
    trials = int(cfg.get("trials", 20000))
    d = default_prior(float(cfg["M"]))
    fits = _grid_map(lambda a, rng: zf_curve(float(a), Ps, d, trials,
                                             int(rng.integers(2 ** 32)), float(cfg["M"])),
                     alphas, cfg.seed, threads)
    rows = [p.to_row() for f in fits for p in f.points]
    return ExperimentResult("scheme_zf", rows, {
        "quantizer": "uniform cells over the prior support, midpoint estimate",
        "fits": [f.summary() for f in fits]})


def run_scheme_bia(cfg, threads=1):
    Ps = [float(p) for p in cfg.get("scheme_P", [10.0 ** k for k in range(6, 19, 2)])]
    f = bia_curve(Ps, int(cfg.get("trials", 2000)), cfg.seed, float(cfg["M"]))
    return ExperimentResult("scheme_bia", [p.to_row() for p in f.points],
                            {"fit": f.summary()})


TOY_DEFAULT = {"codebook": [[0, 2], [1, 1], [2, 0]], "channels": [1, 2]}


def run_toy(cfg, threads=1):
    toy = cfg.get("toy", TOY_DEFAULT)
    rep = toy_distinct_images(toy["codebook"], toy["channels"])
    rows = [{"G": str(G), "images": c} for G, c in rep.counts.items()]
    counts = {str(G): c for G, c in rep.counts.items()}
    msg = "per-channel image counts: " + ", ".join(f"G={G}: {c}" for G, c in counts.items())
    return ExperimentResult("toy", rows, {
        "counts": counts, "separated": rep.separated, "max_images": rep.max_images,
        "sqrt_codebook": rep.sqrt_codebook}, [], msg)


RUNNERS = {
    "canonical-reduce": run_canonical_reduce,
    "enumerate-sets": run_enumerate_sets,
    "bound-check": run_bound_check,
    "entropy-grid": run_entropy_grid,
    "scheme-zf": run_scheme_zf,
    "scheme-bia": run_scheme_bia,
    "toy": run_toy,
}


def run(cfg: ExperimentConfig, threads=1) -> ExperimentResult:
    return RUNNERS[cfg.subcommand](cfg, threads)
