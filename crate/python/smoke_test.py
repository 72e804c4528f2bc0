"""Smoke test for the sumlab extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""
import csv
import io
import math
import random

import sumlab


def main():
    u = sumlab.unit_roundoff(11)
    assert u == 2.0**-11

    assert sumlab.round(1.0 + 2.0**-11, 11) == 1.0
    assert sumlab.round(1.0 + 3 * 2.0**-11, 11) == 1.0 + 2.0**-9

    rng = random.Random(7)
    x = [rng.random() for _ in range(1000)]

    for tree in (sumlab.Tree.sequential(1000), sumlab.Tree.pairwise(1000), sumlab.Tree.random(1000, seed=3)):
        stats = tree.stats()
        assert stats["leaf_pairs"] + stats["n_tilde"] + 1 == tree.n
        for mode in ("rtn", "sr"):
            run = sumlab.tree_sum(tree, x, mode=mode, seed=11)
            assert len(run.deltas) == tree.n - 1
            oracle, observed = sumlab.error_via_local_products(run, tree)
            assert math.isclose(oracle, observed, rel_tol=1e-10, abs_tol=1e-18), (oracle, observed)
            b = sumlab.tree_bounds(tree, run.inputs, mode=mode)
            assert abs(run.error) <= b["DET_PARTIAL"] <= b["DET_INPUTS"]
            assert b["PROB_CLOSED_PARTIAL"] <= b["PROB_CLOSED_INPUTS"]
        print(f"{tree!r}: {run!r}")

    shifted = sumlab.shifted_sum(sumlab.Tree.sequential(1000), x, mode="sr", seed=1)
    comp = sumlab.compensated_sum(x, t=11, mode="sr", seed=1)
    assert len(comp.deltas) == 4 * (len(x) - 1)
    assert comp.relative_error <= 10 * u
    print(f"shifted: {shifted!r}")
    print(f"compensated: {comp!r}")
    cb = sumlab.compensated_bounds(comp.inputs, t=11, mode="sr")
    assert abs(comp.error) <= cb["COMP_PROB_REC"]

    c = sumlab.constants(1e5, 1e5, t=11)
    assert abs(c["lambda_n"] - 6.2) / 6.2 < 0.02
    assert abs(1 + c["phi_n"] - 4.4) / 4.4 < 0.02

    text = sumlab.run_experiment("experiment = pairwise\nn = 100, 1000\ntrials = 3\nseed = 5\n")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2 * 2 * 3
    assert rows[0]["schema_version"] == str(sumlab.SCHEMA_VERSION)
    assert text == sumlab.run_experiment("experiment = pairwise\nn = 100, 1000\ntrials = 3\nseed = 5\n")

    results = sumlab.verify_suite(quick=True)
    failed = [r for r in results if not r[2]]
    print(f"verify (quick): {len(results) - len(failed)}/{len(results)} checks passed")
    assert not failed, failed
    print("smoke test OK")


if __name__ == "__main__":
    main()
