"""Smoke test for the nlperim Python module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math
import tempfile
from pathlib import Path

import nlperim


def main():
    grid = nlperim.Grid(2, 32, 4.0)
    table = nlperim.Kernel.gaussian(2, 1.0).tabulate(grid)
    assert abs(table.l1_norm - math.pi) < 1e-12

    ball = nlperim.Field.ball(grid, math.pi)
    per = nlperim.perimeter(ball, table)
    assert abs(nlperim.energy(ball, table) - per) < 1e-9 * per
    print(f"Per_K(ball of area pi) = {per:.6f}")

    for m, g in nlperim.profile(table, [0.5, 1.0, 2.0]):
        assert g <= table.l1_norm * m
        print(f"g({m:.4f}) = {g:.6f}")

    sol = nlperim.minimize(table, math.pi, restarts=2, seed=1)
    assert sol.certificate.passed and sol.converged
    assert all(b <= a for a, b in zip(sol.history, sol.history[1:]))
    print(f"minimize: energy {sol.energy:.6f}, distance to ball {sol.distance_to_ball:.4f}")

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "f.nlpg1"
        sol.field.save(path)
        back = nlperim.Field.load(path)
        assert back.values == sol.field.values
        cert = nlperim.certify(back, table)
        assert cert.passed
        print(cert)

    periodic = nlperim.Grid(2, 32, 4.0, "periodic")
    assert nlperim.Kernel.gaussian(2, 1.0).tabulate(periodic).is_positive_definite()
    assert not nlperim.Kernel.annulus_indicator(2, 1.0, 0.5, 1.0).tabulate(periodic).is_positive_definite()

    try:
        nlperim.Kernel.fractional(1, 1.5)
    except nlperim.NlperimError as e:
        assert "(0,1)" in str(e)
    else:
        raise AssertionError("s = 1.5 accepted")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
