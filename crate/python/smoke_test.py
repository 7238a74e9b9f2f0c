"""Smoke test for the cfmg Python module.

Uses an installed `cfmg` if there is one, otherwise loads the library built by
`cargo build --release -p cfmg-py --features extension-module`.
"""

import importlib.machinery
import importlib.util
import itertools
import os
import random
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        import cfmg

        return cfmg
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libcfmg_py.so", "libcfmg_py.dylib", "cfmg_py.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("cfmg", str(lib))
                spec = importlib.util.spec_from_loader("cfmg", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules["cfmg"] = module
                return module
    sys.exit("cfmg extension not found; build it with cargo first")


def brute_sum(g, values, u, v, semigroup):
    items = [values[w] for w in g.interval(u, v)]
    if semigroup == "min":
        return min(items)
    return sum(items) % (1 << 64)


def main():
    cfmg = load()
    rng = random.Random(7)

    g = cfmg.generate("grid", (4, 4))
    assert (g.n, g.edge_count) == (16, 24), g
    assert all(r["ok"] for r in cfmg.verify(g))
    idx = cfmg.Index.build(g)
    assert idx.query(0, 15) == 16
    assert idx.query(5, 5) == 1
    assert idx.distance(0, 15) == 6
    assert idx.median(0, 3, 12) == 0

    for family, size in [("grid", "7x5"), ("glued", (6, 6)), ("random_expansion", 90), ("tree", 40)]:
        g = cfmg.generate(family, size, seed=3, payload="random(11)")
        for semigroup in cfmg.SEMIGROUPS:
            idx = cfmg.Index.build(g, semigroup, leaf_size=1)
            values = idx.values()
            pairs = [(rng.randrange(g.n), rng.randrange(g.n)) for _ in range(150)]
            got = idx.query_many(pairs)
            for (u, v), x in zip(pairs, got):
                assert x == brute_sum(g, values, u, v, semigroup), (family, semigroup, u, v)
        dist = [g.distances(s) for s in range(g.n)]
        for a, b, c in (rng.sample(range(g.n), 3) for _ in range(50)):
            m = idx.median(a, b, c)
            for x, y in itertools.combinations((a, b, c), 2):
                assert dist[x][m] + dist[m][y] == dist[x][y]
        u, v = rng.randrange(g.n), rng.randrange(g.n)
        d = idx.decompose(u, v)
        covered = sorted(w for p in d["parts"] for w in g.interval(p["from"], p["to"]))
        assert covered == g.interval(u, v), (family, u, v)

    c6 = cfmg.Graph(6, [(i, (i + 1) % 6) for i in range(6)])
    assert not cfmg.verify(c6)[0]["ok"]
    try:
        cfmg.Index.build(c6)
        raise AssertionError("C6 accepted")
    except cfmg.RejectedError:
        pass

    g = cfmg.Graph.parse("3 2\n10 20\n20 30\n#payloads\n10 5\n20 6\n30 7\n")
    assert g.labels() == [10, 20, 30] and g.id_of(30) == 2
    idx = cfmg.Index.build(g)
    assert idx.query(0, 2) == 18
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "p3.idx")
        idx.save(path)
        again = cfmg.Index.load(path)
        assert again.query(0, 2) == 18 and again.stats() == idx.stats()
        data = bytearray(idx.to_bytes())
        data[-1] ^= 0xFF
        try:
            cfmg.Index.from_bytes(bytes(data))
            raise AssertionError("corrupt index accepted")
        except cfmg.CfmgError:
            pass

    print("python smoke test ok")


if __name__ == "__main__":
    main()
