"""Reproducible experiment drivers shared by the CLI and the test suite.

Every repetition derives its own seed from (global seed, indices), so runs
are deterministic regardless of how many worker threads execute them and
results merge in index order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import synth
from .exceptions import InvalidInputError
from .generator import KnockoffModel, LossBreakdown, TrainingConfig, sample_knockoffs, train
from .knockoff_filter import run_filter
from .ot import SinkhornConfig
from .stats import (
    KernelSpec,
    energy_distance,
    mmd_unbiased,
    rank_energy,
    soft_rank_energy,
    soft_rank_mmd,
)

STATISTICS = ("energy", "mmd", "re", "sre", "srmmd")


@dataclass(frozen=True)
class FilterConfig:
    """Knockoff-filter benchmark parameters (per-repetition pipeline)."""

    alpha: float = 0.1
    q: float = 0.1
    num_nonzero: int = 10
    amplitudes: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    repetitions: int = 50
    n_test: int = 1000
    random_signs: bool = True
    lasso_tolerance: float = 1e-9
    lasso_max_iters: int = 10_000


def evaluate_statistic(
    name: str,
    x: np.ndarray,
    y: np.ndarray,
    epsilon: float = 0.0,
    kernel: KernelSpec | None = None,
    cfg: SinkhornConfig | None = None,
) -> float:
    """Dispatch a two-sample statistic by its CLI name."""
    if name == "energy":
        return energy_distance(x, y)
    if name == "mmd":
        return mmd_unbiased(x, y, kernel)
    if name == "re":
        return rank_energy(x, y)
    if name == "sre":
        return soft_rank_energy(x, y, epsilon, cfg)
    if name == "srmmd":
        return soft_rank_mmd(x, y, epsilon, kernel, cfg)
    raise InvalidInputError(f"unknown statistic {name!r}; expected one of {STATISTICS}")


def saturation_rows(
    statistic: str,
    shifts,
    sizes,
    dims,
    epsilons,
    repetitions: int,
    seed: int,
    kernel: KernelSpec | None = None,
    cfg: SinkhornConfig | None = None,
    threads: int = 1,
) -> list[dict]:
    """Mean and Monte-Carlo standard error of a statistic between
    U[0,1]^d and U[s, s+1]^d over a (s, n, d, epsilon) grid.

    Within one (n, d, repetition) cell the same uniform draws are reused
    for every shift and epsilon (common random numbers), which sharpens
    flatness comparisons along the shift axis.
    """
    if statistic not in STATISTICS:
        raise InvalidInputError(f"unknown statistic {statistic!r}")
    if statistic in ("energy", "mmd", "re"):
        epsilons = (0.0,)
    if repetitions < 2:
        raise InvalidInputError("need at least 2 repetitions for a standard error")

    tasks = [
        (si, ni, di, ei)
        for si in range(len(shifts))
        for ni in range(len(sizes))
        for di in range(len(dims))
        for ei in range(len(epsilons))
    ]

    def run_task(task):
        si, ni, di, ei = task
        s, n, d, eps = shifts[si], sizes[ni], dims[di], epsilons[ei]
        values = np.empty(repetitions)
        for rep in range(repetitions):
            rng = np.random.default_rng((seed, ni, di, rep))
            x = rng.random((n, d))
            y = rng.random((n, d)) + s
            values[rep] = evaluate_statistic(statistic, x, y, eps, kernel, cfg)
        return {
            "statistic": statistic,
            "s": float(s),
            "n": int(n),
            "d": int(d),
            "epsilon": float(eps),
            "mean": float(values.mean()),
            "std_error": float(values.std(ddof=1) / np.sqrt(repetitions)),
            "repetitions": int(repetitions),
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_task, tasks))
    return [run_task(t) for t in tasks]


def _stage(name: str, rep: int, fn):
    try:
        return fn()
    except Exception as exc:
        raise type(exc)(
            f"benchmark repetition {rep} failed at stage '{name}': {exc}"
        ) from exc


def bench_repetition(
    model: KnockoffModel,
    data_spec: synth.SynthSpec,
    filt: FilterConfig,
    seed: int,
    rep: int,
) -> list[dict]:
    """One repetition: fresh design, knockoffs, then one filter run per
    amplitude on that design."""
    test_spec = replace(data_spec, n=filt.n_test, seed=(seed, 2, rep))
    x = _stage("synth", rep, lambda: synth.sample(test_spec))
    xk = _stage("knockoffs", rep, lambda: sample_knockoffs(model, x, (seed, 3, rep)))
    rows = []
    for ai, amp in enumerate(filt.amplitudes):
        rspec = synth.ResponseSpec(
            num_nonzero=filt.num_nonzero,
            amplitude=amp,
            seed=(seed, 4, rep, ai),
            random_signs=filt.random_signs,
        )
        y, support, _ = _stage("response", rep, lambda: synth.response(x, rspec))
        outcome = _stage(
            "filter",
            rep,
            lambda: run_filter(
                x,
                xk,
                y,
                filt.alpha,
                filt.q,
                support,
                tolerance=filt.lasso_tolerance,
                max_iters=filt.lasso_max_iters,
            ),
        )
        rows.append(
            {
                "setting": data_spec.kind,
                "amplitude": float(amp),
                "repetition": int(rep),
                "fdp": float(outcome.fdp),
                "power": float(outcome.power),
                "tau": float(outcome.tau),
                "n_selected": len(outcome.selected),
            }
        )
    return rows


def bench_run(
    data_spec: synth.SynthSpec,
    train_cfg: TrainingConfig,
    filt: FilterConfig,
    seed: int,
    threads: int = 1,
) -> tuple[list[dict], list[dict], KnockoffModel, list[LossBreakdown]]:
    """Full benchmark: train once, then filter over amplitudes x repetitions.

    Returns (detail rows, aggregate rows, trained model, training log).
    Detail rows are ordered repetition-major; aggregates are per-amplitude
    means of the per-repetition FDP and power.
    """
    train_spec = replace(data_spec, seed=(seed, 0))
    x_train = synth.sample(train_spec)
    model, log = train(x_train, replace(train_cfg, seed=seed))

    def one(rep):
        return bench_repetition(model, data_spec, filt, seed, rep)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(one, range(filt.repetitions)))
    else:
        per_rep = [one(rep) for rep in range(filt.repetitions)]
    detail = [row for rows in per_rep for row in rows]

    aggregate = []
    for amp in filt.amplitudes:
        rows = [r for r in detail if r["amplitude"] == float(amp)]
        aggregate.append(
            {
                "setting": data_spec.kind,
                "amplitude": float(amp),
                "mean_fdr": float(np.mean([r["fdp"] for r in rows])),
                "mean_power": float(np.mean([r["power"] for r in rows])),
                "repetitions": len(rows),
            }
        )
    return detail, aggregate, model, log
