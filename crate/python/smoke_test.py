"""Smoke test for the compiled extension."""

import json
import math
import tempfile

import bernstein_lab_py as bl


def main():
    leaf = bl.Leaf(200.0, 1e-12)
    assert leaf.s[0] == 0.0 and leaf.sigma[0] == 1.0
    assert leaf.max_residual() < 1e-8
    assert leaf.trapping_entry() is not None
    assert abs(leaf.a - 0.75) < 1e-2
    sigma, dsigma, _ = leaf.eval(50.0)
    assert abs(sigma - 50.0) < 1e-2 and abs(dsigma - 1.0) < 1e-3
    assert leaf.to_csv().startswith("s,sigma,sigma_p,sigma_pp\n")
    pert = leaf.perturb()
    assert pert["min_margin"] > 0.0

    roots, osc = bl.simons_exponents(7, 1.9)
    assert not osc and all(abs(r * r + 3 * r + 1.9) < 1e-12 for r in roots)
    roots, osc = bl.simons_exponents(4, 1.0)
    assert osc and roots[0].imag != 0.0

    cone = bl.ConeSpec(7, 6.0)
    assert cone.hardy_constant() == 6.25
    rep = cone.report(1.9)
    assert rep["stable"] and not rep["oscillation"]

    lam = 0.4
    theta = 0.3
    want = math.tan(math.atan(lam) - theta)
    assert abs(bl.rotate_eigenvalue(lam, theta) - want) < 1e-12
    h = bl.rotate_hessian([[lam, 0.0], [0.0, -lam]], theta)
    assert abs(h[0][0] - want) < 1e-12

    value, witness = bl.convexity_witness(3, 0.0, 2000, 1)
    assert witness is not None and witness["value"] == value and value < 0.0
    value, witness = bl.convexity_witness(3, math.pi / 2, 2000, 1)
    assert witness is None and value >= -1e-9

    k = bl.cone_slope()
    assert abs(k - math.sqrt(5) / 2) < 1e-12
    assert max(abs(r) for r in bl.cone_map_residual([0.3, -0.7, 0.5, 1.1], k)) < 1e-6
    k_star, max_res, n = bl.lawson_osserman_report(20, 3)
    assert n == 20 and max_res < 1e-6

    m = bl.MinimalMap([0j, 0j, 0.25 + 0j], 2.0, 0.3)
    u = m((0.4, -0.2))
    assert all(math.isfinite(c) for c in u)
    assert len(m.metric_density()) == 2

    with tempfile.TemporaryDirectory() as out:
        passed, text = bl.run_experiment("simons", out, {"n": "7", "kappa": "6"})
        report = json.loads(text)
        assert passed and report["experiment"] == "simons"
        try:
            bl.run_experiment("simons", out, {"kapa": "6"})
        except ValueError:
            pass
        else:
            raise AssertionError("unknown key accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
