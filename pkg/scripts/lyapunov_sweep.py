"""Randomized check that V_k never increases for admissible hyperparameters.

Draws stable second-order plants, multisine inputs and hyperparameters
satisfying every convergence condition, then reports the largest one-step
change in V over each run.

    python3 scripts/lyapunov_sweep.py --runs 200 --seed 0
"""

import argparse
import math

import numpy as np

from hbtv.analysis import lyapunov_value
from hbtv.estimators import HbTvEstimator, HbTvHyper, eta_lower_bound
from hbtv.harness import run_estimators
from hbtv.plant import PlantModel, RegressionProblem, simulate
from hbtv.signals import Signal


def draw(rng):
    r = rng.uniform(0.2, 0.95)
    w = rng.uniform(0.1, math.pi - 0.1)
    plant = PlantModel([-2 * r * math.cos(w), r * r], rng.uniform(-1.5, 1.5, size=2))
    comps = tuple((rng.uniform(0.5, 1.5), rng.uniform(0.1, math.pi - 0.1), rng.uniform(0, 2 * math.pi)) for _ in range(3))
    signal = Signal("multisine", comps, offset=rng.uniform(0.5, 1.5))
    lam = rng.uniform(1.0, 1.05)
    kappa = rng.uniform(0.1, 1.9) * lam
    beta = rng.uniform(0.1, 1.9)
    hyper = HbTvHyper(lam, kappa, beta, eta_lower_bound(lam, kappa, beta) * rng.uniform(1.0, 2.0))
    return plant, signal, hyper


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--steps", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    worst_all, failures = -math.inf, 0
    for _ in range(args.runs):
        plant, signal, hyper = draw(rng)
        samples = simulate(plant, signal, args.steps)
        phis = np.array([s.phi for s in samples])
        ys = np.array([s.y for s in samples])
        theta_star = RegressionProblem.from_plant(plant).true_theta
        est = HbTvEstimator("hbtv", 4, hyper, rng.uniform(0.01, 100.0), rng.normal(size=4), rng.normal(size=4))
        t = run_estimators([est], phis, ys, theta_star)["hbtv"]
        failures += t.failure is not None
        gains, th, vt = t.gain_history, t.theta_history, t.vartheta_history
        V = [lyapunov_value(vt[k], th[k], theta_star, gains[k]) for k in range(len(gains))]
        worst_all = max(worst_all, float(np.max(np.diff(V))))
    print(f"runs {args.runs}, steps {args.steps}: largest step change in V {worst_all:.3e}, estimator failures {failures}")


if __name__ == "__main__":
    main()
