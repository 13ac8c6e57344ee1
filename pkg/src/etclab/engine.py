"""Vectorized batch simulation of episodes over per-replication streams.

Every replication owns its own PCG64 stream; the j-th standard normal of
that stream is the reward noise of the j-th observed step, exactly as in
`policies.run_episode`.  The kernels below read the same stream prefixes,
evaluate the same float expressions in the same order, and index the same
precomputed threshold/bonus tables as the scalar step functions, so batch
results agree bit-for-bit with episode-by-episode runs.  Buffer block sizes
only control how far ahead of need each stream is read, never which values
are used, so results are independent of the chunking parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BanditInstance, PolicyKind, PolicySpec
from .policies import (
    bai_threshold_table,
    delta_ucb_slack,
    resolve_fb_budget,
    sprt_threshold,
    ucb_bonus_table,
)

#: Cap (in float64 values) on one reward-buffer chunk; bounds memory use.
_CHUNK_VALUES = 1 << 24

#: Exploration pairs drawn per refill in the sequential-test kernels.
_PAIR_BLOCK = 256

#: Time steps per refill in the fully sequential kernels.
_TIME_BLOCK = 1024

#: Row tile used when transposing fill buffers into step-major layout.
_TILE = 256


@dataclass
class BatchResult:
    """Per-episode outcomes of a batch run, indexed by replication.

    tau is -1 when exploration never stopped and committed is 0 when no arm
    was committed (both always true for fully sequential kinds).
    """

    horizon: int
    n1: np.ndarray
    n2: np.ndarray
    tau: np.ndarray
    committed: np.ndarray


def run_batch(
    spec: PolicySpec, instance: BanditInstance, seeds: np.ndarray
) -> BatchResult:
    """Simulate one episode per seed and return their outcome arrays."""
    mu1, mu2 = instance.mu1, instance.mu2
    horizon = spec.horizon
    kind = spec.kind
    if kind is PolicyKind.FB_ETC:
        return _fb_batch(horizon, resolve_fb_budget(spec), mu1, mu2, seeds)
    if kind is PolicyKind.SPRT_ETC:
        threshold = sprt_threshold(horizon, spec.known_gap)
        gap = spec.known_gap

        def sprt_rule(pairs, m1, m2):
            return (pairs * gap) * np.abs(m1 - m2) >= threshold

        return _sequential_etc_batch(horizon, mu1, mu2, seeds, sprt_rule)
    if kind is PolicyKind.BAI_ETC:
        table = bai_threshold_table(horizon)

        def bai_rule(pairs, m1, m2):
            idx = pairs.astype(np.int64) - 1
            return np.abs(m1 - m2) >= table[idx]

        return _sequential_etc_batch(horizon, mu1, mu2, seeds, bai_rule)
    if kind in (PolicyKind.DELTA_UCB, PolicyKind.UCB_STAR):
        return _ucb_batch(spec, mu1, mu2, seeds)
    raise ValueError(f"unknown policy kind {kind}")


def _generators(seeds: np.ndarray):
    return [np.random.default_rng(int(s)) for s in seeds]


def _fb_batch(horizon, budget, mu1, mu2, seeds) -> BatchResult:
    total = len(seeds)
    n2 = np.empty(total, dtype=np.int64)
    committed = np.empty(total, dtype=np.int8)
    rows_per_chunk = max(1, _CHUNK_VALUES // (2 * budget))
    for start in range(0, total, rows_per_chunk):
        stop = min(start + rows_per_chunk, total)
        gens = _generators(seeds[start:stop])
        buf = np.empty((stop - start, 2 * budget))
        for i, gen in enumerate(gens):
            gen.standard_normal(out=buf[i])
        # Sequential accumulation reproduces the scalar running sums exactly.
        x = mu1 + buf[:, 0::2]
        y = mu2 + buf[:, 1::2]
        np.add.accumulate(x, axis=1, out=x)
        np.add.accumulate(y, axis=1, out=y)
        m1 = x[:, -1] / budget
        m2 = y[:, -1] / budget
        com = np.where(m1 >= m2, 1, 2).astype(np.int8)
        committed[start:stop] = com
        n2[start:stop] = budget + (horizon - 2 * budget) * (com == 2)
    n1 = horizon - n2
    tau = np.full(total, 2 * budget, dtype=np.int64)
    return BatchResult(horizon, n1, n2, tau, committed)


def _sequential_etc_batch(horizon, mu1, mu2, seeds, stop_rule) -> BatchResult:
    total = len(seeds)
    tau = np.full(total, -1, dtype=np.int64)
    committed = np.zeros(total, dtype=np.int8)
    max_pairs = horizon // 2
    rows_per_chunk = max(1, _CHUNK_VALUES // (2 * _PAIR_BLOCK))

    for start in range(0, total, rows_per_chunk):
        stop = min(start + rows_per_chunk, total)
        gens = _generators(seeds[start:stop])
        active = np.arange(start, stop, dtype=np.int64)
        carry1 = np.zeros(stop - start)
        carry2 = np.zeros(stop - start)
        done = 0
        while active.size and done < max_pairs:
            k = min(_PAIR_BLOCK, max_pairs - done)
            buf = np.empty((active.size, 2 * k))
            for i, j in enumerate(active):
                gens[j - start].standard_normal(out=buf[i])
            x = mu1 + buf[:, 0::2]
            y = mu2 + buf[:, 1::2]
            # Prepend the carried sums so accumulation continues the exact
            # addition order of an unchunked run.
            cs1 = np.cumsum(np.concatenate([carry1[:, None], x], axis=1), axis=1)[:, 1:]
            cs2 = np.cumsum(np.concatenate([carry2[:, None], y], axis=1), axis=1)[:, 1:]
            pairs = np.arange(done + 1, done + k + 1, dtype=np.float64)
            m1 = cs1 / pairs
            m2 = cs2 / pairs
            hits = stop_rule(pairs, m1, m2)
            hit_any = hits.any(axis=1)
            first = np.argmax(hits, axis=1)
            rows = np.flatnonzero(hit_any)
            if rows.size:
                cols = first[rows]
                idx = active[rows]
                tau[idx] = 2 * (done + 1 + cols)
                committed[idx] = np.where(m1[rows, cols] >= m2[rows, cols], 1, 2)
            keep = ~hit_any
            carry1 = cs1[keep, -1]
            carry2 = cs2[keep, -1]
            active = active[keep]
            done += k

    stopped = tau >= 0
    explore_pairs = np.where(stopped, tau // 2, max_pairs)
    n2 = np.where(
        stopped,
        explore_pairs + (horizon - tau) * (committed == 2),
        horizon // 2,
    ).astype(np.int64)
    n1 = horizon - n2
    return BatchResult(horizon, n1, n2, tau, committed)


def _ucb_batch(spec, mu1, mu2, seeds) -> BatchResult:
    horizon = spec.horizon
    kind = spec.kind
    bonus = ucb_bonus_table(horizon)
    if kind is PolicyKind.DELTA_UCB:
        gap = spec.known_gap
        slack = gap - 2.0 * delta_ucb_slack(horizon, gap)
    total = len(seeds)
    out_n1 = np.empty(total, dtype=np.int64)
    out_n2 = np.empty(total, dtype=np.int64)
    rows_per_chunk = max(1, min(total, _CHUNK_VALUES // _TIME_BLOCK))

    for start in range(0, total, rows_per_chunk):
        stop = min(start + rows_per_chunk, total)
        rows = stop - start
        gens = _generators(seeds[start:stop])
        width = min(_TIME_BLOCK, horizon)
        fill = np.empty((rows, width))
        block = np.empty((width, rows))
        n1 = np.zeros(rows, dtype=np.int64)
        n2 = np.zeros(rows, dtype=np.int64)
        s1 = np.zeros(rows)
        s2 = np.zeros(rows)
        i1 = np.empty(rows)
        i2 = np.empty(rows)
        scratch = np.empty(rows)
        z1 = np.empty(rows)
        z2 = np.empty(rows)
        pick1 = np.empty(rows, dtype=bool)
        pick2 = np.empty(rows, dtype=bool)
        pickf = np.empty(rows)
        pickg = np.empty(rows)
        if kind is PolicyKind.DELTA_UCB:
            nmin = np.empty(rows, dtype=np.int64)
            amin1 = np.empty(rows, dtype=bool)

        for t in range(horizon):
            r = t % _TIME_BLOCK
            if r == 0:
                w = min(_TIME_BLOCK, horizon - t)
                for i, gen in enumerate(gens):
                    gen.standard_normal(out=fill[i, :w])
                _transpose_into(block, fill, w)
            xi = block[r]
            if t == 0:
                pick1[:] = True
            elif t == 1:
                pick1[:] = False
            elif kind is PolicyKind.UCB_STAR:
                np.take(bonus, n1, out=i1, mode="clip")
                np.divide(s1, n1, out=scratch)
                np.add(scratch, i1, out=i1)
                np.take(bonus, n2, out=i2, mode="clip")
                np.divide(s2, n2, out=scratch)
                np.add(scratch, i2, out=i2)
                np.greater_equal(i1, i2, out=pick1)
            else:
                np.less_equal(n1, n2, out=amin1)
                np.minimum(n1, n2, out=nmin)
                np.divide(s1, n1, out=i1)
                np.divide(s2, n2, out=i2)
                mu_min = np.where(amin1, i1, i2)
                mu_max = np.where(amin1, i2, i1)
                np.take(bonus, nmin, out=scratch, mode="clip")
                np.add(mu_min, scratch, out=mu_min)
                np.add(mu_max, slack, out=mu_max)
                np.greater_equal(mu_min, mu_max, out=pick2)  # prefer arm_min
                np.equal(pick2, amin1, out=pick1)
            np.logical_not(pick1, out=pick2)
            np.copyto(pickf, pick1, casting="unsafe")
            np.subtract(1.0, pickf, out=pickg)
            np.add(xi, mu1, out=z1)
            np.multiply(z1, pickf, out=z1)
            np.add(s1, z1, out=s1)
            np.add(xi, mu2, out=z2)
            np.multiply(z2, pickg, out=z2)
            np.add(s2, z2, out=s2)
            n1 += pick1
            n2 += pick2
        out_n1[start:stop] = n1
        out_n2[start:stop] = n2

    tau = np.full(total, -1, dtype=np.int64)
    committed = np.zeros(total, dtype=np.int8)
    return BatchResult(horizon, out_n1, out_n2, tau, committed)


def _transpose_into(block: np.ndarray, fill: np.ndarray, width: int) -> None:
    # Tiled transpose: an order of magnitude faster than a flat .T copy.
    rows = fill.shape[0]
    for r0 in range(0, rows, _TILE):
        r1 = min(r0 + _TILE, rows)
        block[:width, r0:r1] = fill[r0:r1, :width].T
