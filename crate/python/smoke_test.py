#!/usr/bin/env python3
"""Smoke test for the oneshot_copula_py extension module.

Builds nothing itself: run `cargo build -p oneshot-copula-py` first, then
`python3 python/smoke_test.py`. The script copies the cdylib next to a
temporary sys.path entry under its import name, imports it, and exercises
each exposed operation once.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("liboneshot_copula_py.so", "liboneshot_copula_py.dylib")
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        "extension module not built; run `cargo build -p oneshot-copula-py` first"
    )


def import_module(tmp: Path):
    lib = locate_cdylib()
    target = tmp / ("oneshot_copula_py" + lib.suffix)
    shutil.copy2(lib, target)
    sys.path.insert(0, str(tmp))
    import oneshot_copula_py

    return oneshot_copula_py


def main() -> None:
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        oc = import_module(tmp)

        # Copula maps: tau round trips and a known Frank value.
        assert math.isclose(oc.copula_tau("gh", 1.5), 1.0 / 3.0, rel_tol=1e-12)
        assert math.isclose(oc.alpha_from_tau("gh", 1.0 / 3.0), 1.5, rel_tol=1e-9)
        tau_f = oc.copula_tau("frank", 2.0)
        assert math.isclose(oc.alpha_from_tau("frank", tau_f), 2.0, abs_tol=1e-6)
        assert abs(oc.frank_tau_approx(2.0) - tau_f) < 0.03
        assert oc.copula_tau("frank", -2.0) == -tau_f
        print("ok copula maps")

        # CDF and density behave like a distribution on a probe point.
        c = oc.copula_cdf("gh", 0.3, 0.7, 1.8)
        assert max(0.3 + 0.7 - 1.0, 0.0) <= c <= min(0.3, 0.7)
        assert oc.copula_pdf("frank", 0.3, 0.7, 2.5) > 0.0
        alpha = oc.link_alpha("gh", -1.5, 0.0, 40.0)
        assert math.isclose(alpha, 1.0 + math.exp(-1.5), rel_tol=1e-12)
        print("ok copula cdf/pdf/link")

        # The embedded study fits to its reference coefficients.
        ds = oc.Dataset.builtin("serial-sacrifice")
        assert len(ds) == 14 and ds.total_units == 704
        violations, warnings = ds.validate()
        assert violations == [] and warnings == []
        r = oc.fit(ds, "gh", beta=0.0)
        assert r.converged and r.weighting == "unit-share"
        assert abs(r.a0 - (-2.135)) < 0.02
        assert abs(dict(r.tau_by_stress)[0.0] - 0.106) < 0.005
        robust = oc.fit(ds, "frank", beta=0.6)
        assert robust.converged and robust.weighting == "uniform"
        assert robust.abias_percent < r.abias_percent + 1.0
        print("ok fit", r)

        # CSV round trip preserves the cells exactly.
        csv_path = tmp / "cells.csv"
        ds.to_csv(csv_path)
        again = oc.Dataset.from_csv(csv_path)
        assert again.cells == ds.cells
        print("ok csv round trip")

        # Hand-built dataset agrees with its initializer inputs.
        tiny = oc.Dataset([(10.0, 0.0, 5, 3, 2, 1), (10.0, 1.0, 2, 4, 3, 2)])
        assert tiny.stress_levels == [0.0, 1.0]
        a0, a1 = oc.initialize_theta(tiny, "frank")
        assert math.isfinite(a0) and math.isfinite(a1)
        assert -1.0 <= oc.kendall_tau_hat(tiny, 0.0) <= 1.0
        print("ok dataset construction")

        # Simulation: seeded draws are reproducible, studies deterministic.
        names = oc.builtin_scenarios()
        assert len(names) == 6 and "gh-weibull" in names
        sc = oc.Scenario.builtin("gh-weibull", k_star=50, contaminate=True)
        assert sc.k_star == 50 and sc.contaminate
        probs = sc.true_cell_probs(10.0, 40.0)
        assert math.isclose(sum(probs), 1.0, abs_tol=1e-12)
        draw = sc.simulate(seed=7)
        assert draw.cells == sc.simulate(seed=7).cells
        mc = sc.monte_carlo(betas=[0.0, 0.4], replications=20, seed=oc.DEFAULT_SEED)
        mc2 = sc.monte_carlo(betas=[0.0, 0.4], replications=20, seed=oc.DEFAULT_SEED)
        assert mc.rows == mc2.rows and mc.truth == mc2.truth
        assert mc.truth["a0"] == -2.0 and mc.replications == 20
        assert all(row["converged_replications"] > 0 for row in mc.rows)
        print("ok simulation", mc)

        # Domain errors surface as ValueError.
        for bad in (
            lambda: oc.copula_cdf("gh", 0.5, 0.5, 0.5),
            lambda: oc.alpha_from_tau("gh", -0.2),
            lambda: oc.Dataset.builtin("nope"),
            lambda: oc.Scenario.builtin("gh-weibull", k_star=0),
            lambda: oc.fit(ds, "gh", beta=-1.0),
        ):
            try:
                bad()
            except ValueError:
                pass
            else:
                raise AssertionError("expected ValueError")
        try:
            oc.Dataset.from_csv(tmp / "absent.csv")
        except IOError:
            pass
        else:
            raise AssertionError("expected IOError")
        print("ok error mapping")

    print("smoke test passed")


if __name__ == "__main__":
    main()
