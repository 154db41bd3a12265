#!/usr/bin/env python3
"""Smoke test for the shiftmax Python extension.

Builds the extension with cargo if it is not already importable, then
exercises every exported function against known exact values.
"""

import json
import shutil
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def ensure_module():
    try:
        import shiftmax  # noqa: F401

        return
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "-p", "shiftmax-py", "--release"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "release" / "libshiftmax.so"
    target = Path(__file__).resolve().parent / "shiftmax.so"
    shutil.copy2(built, target)
    sys.path.insert(0, str(target.parent))


def frac(s: str) -> Fraction:
    return Fraction(s)


def main() -> None:
    ensure_module()
    import shiftmax

    # Step functions carry exact rational cylinder values.
    f = shiftmax.StepFunction(2, ["1", "1/2", "0", "1/4"])
    assert f.level() == 2
    assert [frac(v) for v in f.values()] == [
        Fraction(1),
        Fraction(1, 2),
        Fraction(0),
        Fraction(1, 4),
    ]
    assert frac(f.sup_norm()) == 1

    # Haar analysis: the mean plus one coefficient per word; the empty word
    # is the level-0 coefficient (first- vs second-letter imbalance).
    haar = f.haar_coefficients()
    assert frac(haar["mean"]) == Fraction(7, 16)
    assert frac(haar["coeffs"][""]) == Fraction(5, 8)
    assert frac(haar["coeffs"]["0"]) == Fraction(1, 2)
    assert frac(haar["coeffs"]["1"]) == Fraction(-1, 4)

    # Orbit averages and the ergodic supremum.
    assert frac(f.orbit_average("01")) == Fraction(1, 4)
    opt = shiftmax.optimize(f)
    assert opt["maximizer"] == "0"
    assert frac(opt["ergsup"]) == 1
    assert frac(opt["gap"]) == Fraction(3, 4)
    assert opt["period"] == 1 and not opt["tie"]

    # Certification via the gap criterion.
    cert = shiftmax.certify(f, max_level=4)
    assert cert["certified"] and cert["level"] == 1
    assert frac(cert["gap"]) == Fraction(5, 8)

    constant = shiftmax.StepFunction.constant("-7/3")
    tie = shiftmax.certify(constant, max_level=2)
    assert not tie["certified"] and tie["reason"] == "tie"

    # de Bruijn cycles and the rotation polytope.
    cycles = shiftmax.graph_cycles(3)
    assert [c["word"] for c in cycles] == ["0", "1", "01", "001", "011", "0011"]
    assert cycles[2]["period"] == 2

    poly = shiftmax.polytope_summary(3, faces=True)
    assert poly["dim"] == 4
    assert poly["vertex_count"] == 6
    assert len(poly["edges"]) == 13
    assert poly["face_census"] == {-1: 1, 0: 6, 1: 13, 2: 13, 3: 6, 4: 1}

    assert [shiftmax.hamiltonian_count(n) for n in range(2, 6)] == [1, 1, 2, 16]
    assert shiftmax.recursive_complexity("000111") == 4
    assert shiftmax.recursive_complexity("01011") == 5

    # Gauge checks and the uniform-measure decomposition.
    assert shiftmax.check_gauge("default", "2^-n*a_n") == (True, True)
    assert shiftmax.check_gauge("default", "a_n") == (True, False)
    assert shiftmax.beta_decomposition_check()

    # A tiny reproducible experiment.
    config = {
        "gauge": {"rule": "scaled-sequence", "per_level_shift": -1, "shift": 0, "depth": 2},
        "samples": 8,
        "seed": 3,
    }
    report = json.loads(shiftmax.run_experiment_json(json.dumps(config)))
    assert report["certified_total"] == 8
    again = json.loads(shiftmax.run_experiment_json(json.dumps(config)))
    assert report == again

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
