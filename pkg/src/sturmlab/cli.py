"""Command line front end: ``sturmlab <command> [options]``.

Outputs go to ``--out DIR`` (created if needed) or, without it, the primary
artifact is printed to stdout.  Errors are printed as a JSON object and mapped
to exit codes: 2 configuration, 3 precision exhausted, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

from . import experiments as ex
from .contfrac import ContinuedFraction
from .dimension import box_counting_estimate, pre_dimensions
from .errors import ConfigError, SturmError
from .oracle import PotentialSpec, distance_to_cover, finite_eigenvalues, periodic_band_edges
from .tracemap import Precision
from .treeio import TreeCache, dumps, tree_to_json

log = logging.getLogger("sturmlab")

COMMANDS = ("bands", "dim", "invariance", "covariance", "localdim", "continuity", "mc-sweep",
            "oracle-eig", "oracle-periodic")


@dataclass
class RunConfig:
    command: str
    lam: str = "24"
    cf: str = "(1)"
    depth: int = 6
    mantissa_bits: int = 128
    seed: int = 0
    out: Optional[str] = None
    cache_dir: Optional[str] = None
    threads: int = 1
    plot: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        try:
            lam = Decimal(self.lam)
        except InvalidOperation:
            raise ConfigError(f"lambda must be a decimal number, got {self.lam!r}") from None
        if not lam > 0:
            raise ConfigError("lambda must be positive")
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.mantissa_bits < 53:
            raise ConfigError("mantissa bits must be >= 53")
        ContinuedFraction.parse(self.cf)

    @property
    def continued_fraction(self) -> ContinuedFraction:
        return ContinuedFraction.parse(self.cf)

    @property
    def precision(self) -> Precision:
        return Precision(self.mantissa_bits)

    def warnings(self) -> list[str]:
        if Decimal(self.lam) < 24:
            return [f"lambda={self.lam} < 24: dimension identification and covariation bounds are "
                    "only established for lambda >= 24"]
        return []


class _Output:
    def __init__(self, out: Optional[str]):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)
        self.printed = False

    def write(self, name: str, text: str, primary: bool = False):
        if self.dir:
            (self.dir / name).write_text(text)
        elif primary and not self.printed:
            sys.stdout.write(text)
            self.printed = True

    def figure(self, name: str):
        return self.dir / name if self.dir else None


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def run(cfg: RunConfig) -> int:
    cfg.validate()
    out = _Output(cfg.out)
    cache = TreeCache(cfg.cache_dir)
    factory = cache.factory(cfg.threads)
    cf = cfg.continued_fraction
    prec = cfg.precision
    warnings = cfg.warnings()
    extra = cfg.extra
    figures = cfg.plot and out.dir is not None
    if figures:
        from . import plots

    if cfg.command == "bands":
        tree = factory(cfg.depth, cfg.lam, cf, prec)
        doc = tree_to_json(tree)
        doc["warnings"] = warnings
        if doc["counts"] != doc["expected_counts"]:
            raise _invariant("band counts disagree with the transition matrix")
        out.write("bands.json", dumps(doc), primary=True)
        if figures:
            plots.plot_band_tree(tree, out.figure("bands.png"))

    elif cfg.command == "dim":
        tree = factory(cfg.depth, cfg.lam, cf, prec)
        tail = extra.get("tail", 3)
        res = pre_dimensions(tree, tail)
        rows = [(r.k, _fmt(r.s), _fmt(r.residual), _fmt(r.s_err), _fmt(r.max_len), r.count)
                for r in res.s_by_level]
        out.write("dim.csv", _csv(("k", "s_k", "residual", "s_err", "max_len", "count"), rows), primary=True)
        doc = {"lambda": cfg.lam, "cf": cf.literal(), "depth": cfg.depth, "mantissa_bits": prec.mantissa_bits,
               "tail_window": res.tail_window, "tail_min": res.tail_min, "tail_max": res.tail_max,
               "s_by_level": [{"k": r.k, "s": r.s, "residual": r.residual, "s_err": r.s_err} for r in res.s_by_level],
               "notes": list(res.notes), "warnings": warnings}
        if cfg.depth >= 2:
            doc["box_counting"] = _box_estimate(tree, cfg.depth)
        out.write("dim.json", dumps(doc))
        if figures:
            plots.plot_exponents({cf.literal(): [(r.k, r.s) for r in res.s_by_level]},
                                 out.figure("dim.png"), f"lambda={cfg.lam}")

    elif cfg.command == "invariance":
        rep = ex.gauss_experiment(cfg.lam, cf, cfg.depth, prec, seed=cfg.seed, tree_factory=factory)
        doc = rep.to_json()
        doc["warnings"] = warnings
        out.write("invariance.json", dumps(doc), primary=True)
        if figures:
            plots.plot_exponents({
                rep.cf: list(enumerate(rep.s_alpha, start=1)),
                rep.shifted_cf: list(enumerate(rep.s_beta, start=1)),
            }, out.figure("invariance.png"), "Gauss shift")

    elif cfg.command == "covariance":
        tree = factory(cfg.depth, cfg.lam, cf, prec)
        rep = ex.covariance_check(cfg.lam, cf, cfg.depth, extra.get("samples", 200), cfg.seed, prec, tree=tree)
        doc = rep.to_json()
        doc["warnings"] = warnings
        out.write("covariance.json", dumps(doc), primary=True)

    elif cfg.command == "localdim":
        rep = ex.local_dimension_experiment(cfg.lam, cf, cfg.depth, extra.get("probes", 4), cfg.seed, prec,
                                            extra.get("probe_level", 2), extra.get("tail", 3),
                                            tree_factory=factory)
        doc = rep.to_json()
        doc["warnings"] = warnings
        out.write("localdim.json", dumps(doc), primary=True)

    elif cfg.command == "continuity":
        cf2 = ContinuedFraction.parse(extra["cf2"])
        level = extra.get("level", cfg.depth)
        rep = ex.continuity_experiment(cfg.lam, cf, cf2, level, prec, tree_factory=factory)
        doc = rep.to_json()
        doc["warnings"] = warnings
        out.write("continuity.json", dumps(doc), primary=True)

    elif cfg.command == "mc-sweep":
        depths = extra.get("depths", [5, 6, 7])
        rep = ex.mc_sweep(cfg.lam, extra.get("samples", 30), depths, cfg.seed, extra.get("tail", 3), prec,
                          extra.get("max_bands", 5000), tree_factory=factory)
        header = ["cf"] + [f"tail_{m}_{d}" for d in rep.depths for m in ("min", "max")]
        rows = [[r["cf"]] + [_fmt(r[f"tail_{m}_{d}"]) for d in rep.depths for m in ("min", "max")]
                for r in rep.rows]
        out.write("mc_sweep.csv", _csv(header, rows), primary=True)
        doc = rep.to_json()
        doc["warnings"] = warnings
        out.write("mc_sweep.json", dumps(doc))
        if figures:
            plots.plot_histogram({f"depth {d}": [r[f"tail_min_{d}"] for r in rep.rows] for d in rep.depths},
                                 out.figure("mc_sweep_hist.png"))

    elif cfg.command == "oracle-eig":
        size = extra.get("size", 89)
        omega = extra.get("omega", 0.0)
        alpha = float(cf.value(64)) if cf.is_periodic else float(cf.fraction())
        eigs = finite_eigenvalues(size, PotentialSpec(float(cfg.lam), alpha, omega))
        rows = [(repr(float(e)),) for e in eigs]
        cover = None
        if Decimal(cfg.lam) > 4:
            tree = factory(cfg.depth, cfg.lam, cf, prec)
            cover = [(float(b.lo), float(b.hi)) for b in tree.generations[cfg.depth]]
            dists = [distance_to_cover(float(e), cover) for e in eigs]
            rows = [(repr(float(e)), repr(d)) for e, d in zip(eigs, dists)]
            tol = extra.get("tol", 1e-2)
            doc = {"size": size, "omega": omega, "level": cfg.depth, "tol": tol,
                   "fraction_within_tol": sum(d <= tol for d in dists) / len(dists), "warnings": warnings}
            out.write("oracle_eig.json", dumps(doc))
        header = ("eigenvalue", "distance_to_cover") if cover else ("eigenvalue",)
        out.write("oracle_eig.csv", _csv(header, rows), primary=True)
        if figures and cover:
            plots.plot_eigenvalues(eigs, cover, out.figure("oracle_eig.png"))

    elif cfg.command == "oracle-periodic":
        k = extra.get("k", cfg.depth)
        spec = periodic_band_edges(k, cfg.lam, cf, prec)
        rows = [(str(lo), str(hi)) for lo, hi in spec.bands]
        out.write("oracle_periodic.csv", _csv(("lo", "hi"), rows), primary=True)
        out.write("oracle_periodic.json", dumps({"k": k, "period": spec.period, "bands": len(spec.bands),
                                                 "merged": spec.merged, "warnings": warnings}))
    return 0


def _box_estimate(tree, k):
    from .dimension import cover_of

    scales = default_box_scales(tree, k)
    return {"level": k, "scales": [float(s) for s in scales],
            "estimate": box_counting_estimate(cover_of(tree.generations[k].bands), scales)}


def default_box_scales(tree, k, n: int = 16):
    """Geometric grid from the largest level-``k`` band length up to the
    largest band length below 1 among levels ``1..k``."""
    import numpy as np

    fine = max(float(b.length) for b in tree.generations[k])
    coarse = max(float(b.length) for j in range(1, k + 1) for b in tree.generations[j] if b.length < 1)
    if coarse / fine < 100:
        coarse = 100 * fine
    return np.geomspace(fine, coarse, n)


def _invariant(msg):
    from .errors import InvariantViolation

    return InvariantViolation(msg)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sturmlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, depth=6):
        sp.add_argument("--lambda", dest="lam", default="24", help="coupling constant (decimal string)")
        sp.add_argument("--cf", default="(1)", help="frequency as CF literal, e.g. '(1)' or '1,2:(3,4)'")
        sp.add_argument("--depth", type=int, default=depth)
        sp.add_argument("--bits", type=int, default=128, help="mantissa bits")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output directory (default: primary artifact to stdout)")
        sp.add_argument("--cache-dir", help="tree cache directory (default: $STURMLAB_CACHE)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--plot", action="store_true", help="also render PNG figures into --out")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    common(sub.add_parser("bands", help="band-tree JSON"))
    sp = common(sub.add_parser("dim", help="s_k CSV and Moran summary"), depth=8)
    sp.add_argument("--tail", type=int, default=3)
    common(sub.add_parser("invariance", help="compare alpha with its Gauss shift"), depth=8)
    sp = common(sub.add_parser("covariance", help="empirical covariation constant"), depth=7)
    sp.add_argument("--samples", type=int, default=200)
    sp = common(sub.add_parser("localdim", help="subtree dimensions around probe bands"))
    sp.add_argument("--probes", type=int, default=4)
    sp.add_argument("--tail", type=int, default=3)
    sp.add_argument("--probe-level", type=int, default=2)
    sp = common(sub.add_parser("continuity", help="Hausdorff distance between two level covers"))
    sp.add_argument("--cf2", required=True)
    sp.add_argument("--level", type=int)
    sp = common(sub.add_parser("mc-sweep", help="Gauss-Kuzmin sampled frequencies"))
    sp.add_argument("--samples", type=int, default=30)
    sp.add_argument("--depths", default="5,6,7")
    sp.add_argument("--tail", type=int, default=3)
    sp.add_argument("--max-bands", type=int, default=5000)
    sp = common(sub.add_parser("oracle-eig", help="eigenvalues of a finite truncation"))
    sp.add_argument("--size", type=int, default=89)
    sp.add_argument("--omega", type=float, default=0.0)
    sp.add_argument("--tol", type=float, default=1e-2)
    sp = common(sub.add_parser("oracle-periodic", help="periodic approximant bands"), depth=4)
    sp.add_argument("--k", type=int)
    return p


_EXTRA = ("tail", "samples", "probes", "probe_level", "cf2", "level", "max_bands", "size", "omega", "tol", "k")


def config_from_args(argv=None) -> RunConfig:
    ns = _parser().parse_args(argv)
    extra = {k: getattr(ns, k) for k in _EXTRA if getattr(ns, k, None) is not None}
    if getattr(ns, "depths", None):
        extra["depths"] = [int(x) for x in ns.depths.split(",")]
    cfg = RunConfig(ns.command, ns.lam, ns.cf, ns.depth, ns.bits, ns.seed, ns.out, ns.cache_dir, ns.threads,
                    ns.plot, extra)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return cfg


def main(argv=None) -> int:
    cfg = config_from_args(argv)
    try:
        code = run(cfg)
    except SturmError as exc:
        doc = exc.to_json()
        sys.stdout.write(dumps(doc))
        if cfg.out:
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            (Path(cfg.out) / "error.json").write_text(dumps(doc))
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        doc = {"error": "ConfigError", "message": str(exc)}
        sys.stdout.write(dumps(doc))
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
