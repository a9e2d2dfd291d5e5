#!/usr/bin/env python3
"""Smoke test of the parpush_py extension module.

Run python/build_module.sh first (it drops parpush_py.so next to this
file), then: python3 python/smoke_test.py
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import parpush_py as pp

checks = 0


def check(condition, label):
    global checks
    if not condition:
        raise SystemExit(f"FAIL: {label}")
    checks += 1
    print(f"ok: {label}")


# exact arithmetic
check(pp.normalize(2, 4) == "1/2", "normalize 2/4")
check(pp.normalize(3, -6) == "-1/2", "normalize 3/-6")
check(pp.frac_part("-1/3") == "2/3", "frac_part -1/3")

# the squaring map z -> z^2 on the sphere, trivial line bundle upstairs
curve = pp.MarkedCurve(0, ["z0", "zinf"])
cov = pp.Covering(curve, 2, branch={"z0": [[1, 2]], "zinf": [[1, 2]]})
check(cov.validate() == [], "squaring covering is valid")
check(cov.components() == [([1, 2], 0)], "one rational component")
check(cov.ramification_profile("z0") == [("c0:z0:s1", 2)], "totally ramified over z0")

up = pp.UpstairsBundle(cov, components=[(1, 0)])
pushed = up.push_forward()
check(pushed.rank == 2 and pushed.degree == -1, "direct image is rank 2, degree -1")
check(pushed.par_deg() == "0/1", "parabolic degree 0")
check(
    pushed.flags()
    == [("z0", [(1, "0/1"), (1, "1/2")]), ("zinf", [(1, "0/1"), (1, "1/2")])],
    "weights {0, 1/2} at both branch points",
)
check(
    up.push_forward_residues()
    == [("z0", ["0/1", "1/2"]), ("zinf", ["0/1", "1/2"])],
    "pushed residues {0, 1/2}",
)
check(up.verify_parabolicity(), "pushed connection is parabolic")
check(pushed.ohtsuki_check(up.push_forward_residues()), "trace identity downstairs")

# torus datum and reconstruction
torus = up.torus()
check(torus.block_ranks == [1, 1], "two rank-1 blocks")
rec = pp.reconstruct(curve, pushed, torus)
check(rec.covering.degree == 2, "reconstructed degree 2")
check(rec.upstairs.components() == [(1, 0)], "trivial line bundle upstairs")
check(not rec.ambiguous, "assignment is unique")
check(rec.upstairs.push_forward().flags() == pushed.flags(), "re-push matches")

# round trips
check(up.verify_roundtrip_covering(), "covering round trip")
check(up.verify_roundtrip_connection(), "connection round trip")

# connection transfer and its failure mode
induced = rec.induce_connection([("z0", ["0", "1/2"]), ("zinf", ["0", "1/2"])])
check(induced == [], "residues {0, 1/2} invert to the trivial connection")
try:
    rec.induce_connection([("z0", ["0", "1/3"]), ("zinf", ["0", "1/2"])])
    raise SystemExit("FAIL: {0, 1/3} should not be torus preserving")
except ValueError as e:
    check("NotTorusPreserving" in str(e), "{0, 1/3} raises NotTorusPreserving")

# the oracle agrees with the pushed spectrum
check(
    pp.oracle_pushforward_char_poly(["0"], 2) == pp.monic_from_roots(["0", "1/2"]),
    "oracle spectrum {0, 1/2} for b = 2",
)
check(
    pp.oracle_pushforward_char_poly(["1/4"], 3)
    == pp.monic_from_roots(["1/12", "5/12", "3/4"]),
    "oracle spectrum for tau = 1/4, b = 3",
)

# scenario documents load into the same objects
scenario = pp.load_scenario(
    """{
  "version": "parpush/1",
  "base": {"genus": 0, "marked_points": ["z0", "zinf"]},
  "covering": {"degree": 2, "branch": {"z0": [[1, 2]], "zinf": [[1, 2]]}},
  "upstairs": {"components": [{"rank": 1, "degree": 0}]}
}"""
)
check(scenario["upstairs"].push_forward().par_deg() == "0/1", "scenario loads and pushes")

print(f"smoke test passed ({checks} checks)")
