"""Band-tree JSON and the on-disk tree cache.

High-precision values are written as decimal strings with enough digits to
round-trip at the tree's mantissa width.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Optional

import gmpy2
from gmpy2 import mpfr

from .bands import Band, BandTree, BandType, Generation, build_tree, parse_word, type_counts, word_str
from .contfrac import ContinuedFraction
from .tracemap import Precision, TraceSpec

FORMAT = "sturmlab.bandtree/1"
CACHE_ENV = "STURMLAB_CACHE"


MPFR = type(mpfr(0))


def _digits(bits: int) -> int:
    return math.ceil(bits * math.log10(2)) + 2


def dec(x, bits: int) -> str:
    # mpfr.__format__ mishandles long precisions in gmpy2 2.3, so build the string from digits()
    # mpfr(x) on an mpfr would re-round to the context precision
    x = x if isinstance(x, MPFR) else mpfr(x, bits)
    if not gmpy2.is_finite(x):
        return str(x)
    m, e, _ = x.digits(10, _digits(bits))
    sign = "-" if m.startswith("-") else ""
    m = m.lstrip("-")
    if x == 0:
        return sign + "0." + "0" * (len(m) - 1) + "e+00"
    return f"{sign}{m[0]}.{m[1:]}e{e - 1:+03d}"


def tree_to_json(tree: BandTree) -> dict:
    bits = max(tree.prec.mantissa_bits, *(getattr(b.lo, "precision", 53) for g in tree.generations for b in g))
    nodes = []
    for g in tree.generations:
        for b in g:
            nodes.append({
                "id": b.id,
                "order": b.order,
                "type": str(b.btype),
                "lo": dec(b.lo, bits),
                "hi": dec(b.hi, bits),
                "err": dec(b.err, bits),
                "word": word_str(b.word),
                "parent_id": b.parent_id,
                "tspec": [b.tspec.k, b.tspec.p],
            })
    return {
        "format": FORMAT,
        "lambda": tree.lam,
        "cf": tree.cf.literal(),
        "prefix": list(tree.cf.prefix(tree.depth)),
        "mantissa_bits": tree.prec.mantissa_bits,
        "value_bits": bits,
        "depth": tree.depth,
        "counts": [list(g.type_counts()) for g in tree.generations],
        "expected_counts": [list(type_counts(tree.cf, k)) for k in range(tree.depth + 1)],
        "nodes": nodes,
    }


def tree_from_json(data: dict, cf: Optional[ContinuedFraction] = None) -> BandTree:
    if data.get("format") != FORMAT:
        raise ValueError(f"not a band tree document: {data.get('format')!r}")
    prec = Precision(int(data["mantissa_bits"]))
    bits = int(data.get("value_bits", prec.mantissa_bits))
    cf = cf or ContinuedFraction.parse(data["cf"])
    levels = [[] for _ in range(int(data["depth"]) + 1)]
    with gmpy2.context(precision=bits):
        for n in data["nodes"]:
            levels[n["order"]].append(Band(
                n["order"], BandType(n["type"]), mpfr(n["lo"]), mpfr(n["hi"]), mpfr(n["err"]),
                parse_word(n["word"]), TraceSpec(*n["tspec"]), n["parent_id"],
            ))
    gens = [Generation(k, tuple(bs)) for k, bs in enumerate(levels)]
    return BandTree(data["lambda"], cf, prec, gens)


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Strict JSON: non-finite floats become ``null``."""
    return json.dumps(_finite(obj), indent=1, allow_nan=False) + "\n"


class TreeCache:
    """Trees on disk keyed by (lambda string, quotient prefix, mantissa bits).

    A deeper cached tree with a matching prefix serves shallower requests.
    """

    def __init__(self, root=None):
        root = root or os.environ.get(CACHE_ENV)
        self.root = Path(root) if root else None

    def _name(self, lam: str, prefix, bits: int) -> str:
        key = f"{lam}|{','.join(map(str, prefix))}|{bits}"
        return hashlib.sha256(key.encode()).hexdigest()[:24] + ".json"

    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _index(self) -> list:
        p = self._index_path()
        return json.loads(p.read_text()) if p.exists() else []

    def lookup(self, depth: int, lam: str, cf: ContinuedFraction, prec: Precision) -> Optional[BandTree]:
        if self.root is None:
            return None
        want = list(cf.prefix(depth))
        best = None
        for entry in self._index():
            if entry["lambda"] != lam or entry["bits"] != prec.mantissa_bits:
                continue
            if entry["prefix"][:depth] == want and len(entry["prefix"]) >= depth:
                if best is None or len(entry["prefix"]) < len(best["prefix"]):
                    best = entry
        if best is None:
            return None
        path = self.root / best["file"]
        if not path.exists():
            return None
        tree = tree_from_json(json.loads(path.read_text()), cf)
        return tree.truncated(depth) if tree.depth > depth else tree

    def store(self, tree: BandTree, bits: Optional[int] = None) -> None:
        """``bits`` is the requested precision (the key); the tree may carry more."""
        if self.root is None:
            return
        bits = bits or tree.prec.mantissa_bits
        self.root.mkdir(parents=True, exist_ok=True)
        prefix = list(tree.cf.prefix(tree.depth))
        name = self._name(tree.lam, prefix, bits)
        (self.root / name).write_text(dumps(tree_to_json(tree)))
        index = [e for e in self._index() if e["file"] != name]
        index.append({"lambda": tree.lam, "prefix": prefix, "bits": bits, "file": name})
        self._index_path().write_text(dumps(index))

    def factory(self, threads: int = 1):
        """A tree factory that reads through this cache."""

        def make(depth, lam, cf, prec):
            lam = str(lam)
            tree = self.lookup(depth, lam, cf, prec)
            if tree is None:
                tree = build_tree(depth, lam, cf, prec, threads)
                self.store(tree, prec.mantissa_bits)
            return tree

        return make
