"""Smoke test for the judgmix Python extension.

Build and run from the repository root:

    cargo build --release -p judgmix-py --features extension-module
    cp target/release/libjudgmix_py.so python/judgmix.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import judgmix  # noqa: E402


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    truth = judgmix.MixtureParams(0.7, 8.0, 2.0, 1.5, 6.0)
    assert close(sum(truth.pmf_vec(11)), 1.0, 1e-10)
    assert close(judgmix.betabinomial_pmf(2, 3, 5.0, 5.0), 0.3409090909090909, 1e-12)
    assert close(judgmix.binomial_error_rate(3, 0.8), 0.104, 1e-12)
    assert truth.swapped().error_rate(11) == truth.error_rate(11) or close(
        truth.swapped().error_rate(11), truth.error_rate(11), 1e-12
    )

    assert judgmix.theoretical_min_samples(0.03, 25.0) == 56
    assert judgmix.theoretical_min_samples(0.03, 25.0, exact=True) == 57
    lo, hi = judgmix.error_rate_bounds(0.3, 0.03, 25.0, 100)
    assert close(lo, 0.291) and close(hi, 0.309)
    assert judgmix.conformal_quantile([0.1 * i for i in range(1, 11)], 0.1) == 1.0

    data = judgmix.simulate(truth, 11, 5000, 7)
    assert data == judgmix.simulate(truth, 11, 5000, 7)
    fitted, iterations, converged = judgmix.fit_mixture(data)
    assert converged and iterations > 0
    margin = sum(abs(fitted.error_rate(k) - truth.error_rate(k)) for k in (1, 3, 5, 7, 9, 11)) / 6
    assert margin < 0.02, margin

    used, met, history = judgmix.adaptive_sample(data)
    assert met and used >= 56 and len(history) == used

    assert close(judgmix.cosine_similarity([1.0, 0.0], [2.0, 0.0]), 1.0)
    lam = judgmix.transfer_weight(100, 0.7)
    assert close(lam, 0.5 * math.log(100), 1e-12)
    mid = judgmix.blend(truth, [truth.swapped()], [1.0, 1.0])
    assert close(mid.alpha1, (8.0 + 1.5) / 2)

    assert close(judgmix.actual_error_rate([(2, 3)], 1), 1.0 / 3.0, 1e-15)

    try:
        truth.error_rate(4)
    except ValueError:
        pass
    else:
        raise AssertionError("even ensemble accepted")

    print(f"ok: fitted {fitted!r}, mean margin {margin:.4f}, adaptive stop at {used}")


if __name__ == "__main__":
    main()
