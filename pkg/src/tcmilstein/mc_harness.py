"""Coupled-path Monte Carlo estimation of the strong convergence order.

Every step size in the ladder shares one underlying noise per trajectory:
clock and Wiener increments are drawn once at the reference step h_ref, and a
coarser step h = k*h_ref consumes the same randomness through sums of k
consecutive increments.  The coarse first-passage grid therefore passes
through every k-th fine node, and pathwise differences measure discretization
error only.

For each ladder step the strong error is

    e(h) = ( mean_j sup_{tau <= T} |X_ref(tau) - X_h(tau)|^p_bar )^(1/p_bar)

with the sup taken over fine grid nodes; both paths are piecewise constant
between those nodes, so the node maximum is the exact pathwise sup.  The
empirical order is the slope of log10 e(h) against log10 h.

Per-trajectory randomness is derived from (seed, trajectory index) through
counter-based streams, so results are byte-identical for any chunking or
thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import NumericOverflowError, ResourceLimitError
from .scheme import SchemeTag, SdeProblem, em_step, milstein_step
from .subordinator import DEFAULT_MAX_NODES, SubordinatorModel, sample_increments
from .truncation import TruncationConfig

_STEP_FN = {SchemeTag.TRUNCATED_MILSTEIN: milstein_step, SchemeTag.TRUNCATED_EM: em_step}


@dataclass(frozen=True, eq=False)
class CoupledNoise:
    """Fine-step noise of one trajectory: clock increments distributed as
    D(h_fine) and Wiener increments N(0, h_fine) over internal-time cells."""

    h_fine: float
    deltas: np.ndarray
    dw: np.ndarray
    seed: int
    index: int


@dataclass(frozen=True)
class ErrorRow:
    h: float
    m: int
    p_bar: float
    error: float
    stderr: float
    mean_sup_sq: float
    blowups: int = 0


@dataclass(eq=False)
class ErrorTable:
    """Per-step strong errors, rows ordered by decreasing h."""

    rows: list[ErrorRow]
    problem: str
    subordinator: str
    scheme: str
    seed: int
    h_ref: float
    p_bar: float


@dataclass(eq=False)
class RegressionResult:
    slope: float
    intercept: float
    residuals: np.ndarray


def trajectory_rng(seed: int, index: int, role: int) -> np.random.Generator:
    """Counter-based stream for one (trajectory, role) pair.

    role 0 drives the clock increments, role 1 the Wiener increments.
    Streams are independent across (seed, index, role), which makes results
    insensitive to execution order.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index, role))))


def _single_noise(model: SubordinatorModel, h_fine: float, T: float, seed: int, index: int,
                  factor_lcm: int, max_nodes: int) -> CoupledNoise:
    gen = trajectory_rng(seed, index, 0)
    blocks: list[np.ndarray] = []
    count = 0
    block = max(256, int(1.1 * T / h_fine) + 16)
    while True:
        if count >= max_nodes:
            raise ResourceLimitError(
                f"trajectory {index}: noise generation exceeded {max_nodes} increments"
            )
        n = min(block, max_nodes - count)
        blocks.append(sample_increments(model, h_fine, n, gen))
        count += n
        block *= 2
        deltas = blocks[0] if len(blocks) == 1 else np.concatenate(blocks)
        cum = np.cumsum(deltas)
        if cum[-1] > T:
            break
    n_fine = int(np.searchsorted(cum, T, side="right"))
    # enough increments to bracket the horizon at the fine step and, after
    # aggregation, at every ladder step; extend on shortfall
    needed = ((n_fine + 1 + factor_lcm - 1) // factor_lcm) * factor_lcm
    if needed > len(deltas):
        blocks.append(sample_increments(model, h_fine, needed - len(deltas), gen))
        deltas = np.concatenate(blocks)
    deltas = deltas[:needed]
    if not np.all(deltas > 0.0):
        raise ValueError("subordinator increments must be strictly positive")
    dw = trajectory_rng(seed, index, 1).standard_normal(needed) * math.sqrt(h_fine)
    deltas.setflags(write=False)
    dw.setflags(write=False)
    return CoupledNoise(h_fine=h_fine, deltas=deltas, dw=dw, seed=seed, index=index)


def generate_coupled_noise(
    model: SubordinatorModel,
    h_fine: float,
    T: float,
    M: int,
    seed: int,
    factors: Sequence[int] = (1,),
    max_nodes: int = DEFAULT_MAX_NODES,
) -> Iterator[CoupledNoise]:
    """Yield one CoupledNoise per trajectory, each a pure function of
    (seed, trajectory index).

    ``factors`` lists the aggregation factors the noise must support; the
    increment count is a multiple of their least common multiple.
    """
    if not 0.0 < h_fine <= 1.0:
        raise ValueError(f"fine step must lie in (0,1], got {h_fine}")
    if M < 1:
        raise ValueError(f"need at least one trajectory, got {M}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    factors = [int(k) for k in factors]
    if any(k < 1 for k in factors):
        raise ValueError("aggregation factors must be positive integers")
    lcm = math.lcm(*factors) if factors else 1
    for j in range(M):
        yield _single_noise(model, h_fine, T, seed, j, lcm, max_nodes)


def aggregate(noise: CoupledNoise, k: int) -> CoupledNoise:
    """Coarsen by summing k consecutive increments of both streams.

    k = 1 returns the input unchanged.  The increment count must be
    divisible by k.
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"aggregation factor must be >= 1, got {k}")
    if k == 1:
        return noise
    n = len(noise.deltas)
    if n % k:
        raise ValueError(f"increment count {n} is not divisible by {k}")
    deltas = noise.deltas.reshape(-1, k).sum(axis=1)
    dw = noise.dw.reshape(-1, k).sum(axis=1)
    deltas.setflags(write=False)
    dw.setflags(write=False)
    return CoupledNoise(
        h_fine=k * noise.h_fine, deltas=deltas, dw=dw, seed=noise.seed, index=noise.index
    )


def ladder_factors(ladder: Sequence[float], h_ref: float, rel_tol: float = 1e-6) -> list[int]:
    """Integer multiples k = h / h_ref, validated per ladder entry."""
    ks = []
    for h in ladder:
        ratio = h / h_ref
        k = round(ratio)
        if k < 1 or abs(ratio - k) > rel_tol * max(k, 1):
            raise ValueError(f"ladder entry {h} is not an integer multiple of h_ref={h_ref}")
        ks.append(int(k))
    return ks


def _simulate_batch(problem, trunc_cfg, h, tau, dw, n_steps, scheme_tag, T,
                    active_len, traj_indices, skip_blowups):
    """Advance a chunk of trajectories in lockstep and record full histories.

    tau[:, n] supplies the coefficient time argument of step n (clamped to
    the horizon, which only affects padded lanes); dw[:, n] the Wiener
    increment.  Lanes past their own step count carry zero-padded increments
    and are ignored by the caller.
    """
    step = _STEP_FN[scheme_tag]
    c = tau.shape[0]
    x = np.broadcast_to(problem.y0, (c, problem.d)).copy()
    hist = np.empty((c, n_steps + 1, problem.d))
    hist[:, 0] = x
    blown = np.zeros(c, dtype=bool)
    for n in range(n_steps):
        t_n = np.minimum(tau[:, n], T)
        x = step(problem, trunc_cfg, h, t_n, x, dw[:, n])
        if not np.all(np.isfinite(x)):
            finite = np.isfinite(x).all(axis=1)
            bad = ~finite & (n < active_len) & ~blown
            if np.any(bad):
                if not skip_blowups:
                    j = traj_indices[int(np.argmax(bad))]
                    raise NumericOverflowError(
                        f"non-finite state in trajectory {j} at step {n + 1} (h={h:g})"
                    )
                blown |= bad
            x = np.where(finite[:, None], x, 0.0)
        hist[:, n + 1] = x
    return hist, blown


def _masked_row_max(values, limits):
    """Row-wise max of values[:, :limits[row]+1]; values must be >= 0."""
    cols = np.arange(values.shape[1])
    return np.where(cols[None, :] <= limits[:, None], values, -1.0).max(axis=1)


def _chunk_worker(problem, trunc_cfg, model, ks, h_levels, h_ref, seed, indices,
                  scheme_tag, reference, skip_blowups, max_nodes, out_err, out_sup, out_blown):
    """Simulate one chunk of trajectories and fill the per-level outputs."""
    T = problem.T
    lcm = math.lcm(*ks)
    noises = [_single_noise(model, h_ref, T, seed, j, lcm, max_nodes) for j in indices]
    c = len(noises)
    lengths = np.array([len(nz.deltas) for nz in noises])
    L = int(lengths.max())
    delta = np.zeros((c, L))
    dw = np.zeros((c, L))
    for i, nz in enumerate(noises):
        delta[i, : lengths[i]] = nz.deltas
        dw[i, : lengths[i]] = nz.dw
    tau = np.concatenate([np.zeros((c, 1)), np.cumsum(delta, axis=1)], axis=1)
    n_fine = (tau[:, 1:] <= T).sum(axis=1)
    max_nf = int(n_fine.max())

    if reference == "exact":
        ref, ref_blown = None, np.zeros(c, dtype=bool)
    else:
        ref, ref_blown = _simulate_batch(
            problem, trunc_cfg, h_ref, tau, dw, max_nf, scheme_tag, T,
            n_fine, indices, skip_blowups,
        )

    for lvl, (k, h_lvl) in enumerate(zip(ks, h_levels)):
        dw_c_rows = [aggregate(nz, k).dw for nz in noises]
        tau_c = tau[:, ::k]
        n_coarse = (tau_c[:, 1:] <= T).sum(axis=1)
        max_nc = int(n_coarse.max())
        dw_c = np.zeros((c, max_nc))
        for i, row in enumerate(dw_c_rows):
            take = min(len(row), max_nc)
            dw_c[i, :take] = row[:take]
        hist, c_blown = _simulate_batch(
            problem, trunc_cfg, h_lvl, tau_c, dw_c, max_nc, scheme_tag, T,
            n_coarse, indices, skip_blowups,
        )
        if ref is None:
            # Closed-form reference: classical strong error at the coarse
            # grid nodes, whose inverse-clock values are exactly n*h.  A
            # piecewise-constant comparison at fine nodes would be capped at
            # order 1/2 by within-cell Brownian oscillation and could not
            # recover the scheme's grid-point order.
            w_c = np.concatenate([np.zeros((c, 1)), np.cumsum(dw_c, axis=1)], axis=1)
            e_c = np.arange(max_nc + 1) * h_lvl
            exact = np.asarray(problem.exact_solution(e_c[None, :], w_c))
            diff = exact - hist
            dist_sq = (diff * diff).sum(axis=-1)
            sup_err = np.sqrt(_masked_row_max(dist_sq, n_coarse))
        else:
            cidx = np.arange(max_nf + 1) // k
            diff = ref - hist[:, cidx, :]
            dist_sq = (diff * diff).sum(axis=-1)
            sup_err = np.sqrt(_masked_row_max(dist_sq, n_fine))
        sup_sq = _masked_row_max((hist * hist).sum(axis=-1), n_coarse)
        out_err[lvl, indices] = sup_err
        out_sup[lvl, indices] = sup_sq
        out_blown[lvl, indices] = ref_blown | c_blown


def strong_error_table(
    problem: SdeProblem,
    trunc_cfg: TruncationConfig,
    model: SubordinatorModel,
    ladder: Sequence[float],
    h_ref: float,
    M: int,
    p_bar: float,
    seed: int,
    *,
    scheme_tag: SchemeTag = SchemeTag.TRUNCATED_MILSTEIN,
    reference: str = "fine",
    threads: int = 1,
    chunk_size: int = 64,
    skip_blowups: bool = False,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> ErrorTable:
    """Run the coupled experiment over the ladder and tabulate strong errors.

    ``reference="fine"`` treats the h_ref path of the same scheme as the
    exact solution; ``reference="exact"`` uses the problem's closed-form
    solution instead.  Output is byte-identical for any thread count or
    chunk size.
    """
    if M < 1:
        raise ValueError(f"need at least one trajectory, got {M}")
    if p_bar < 2.0:
        raise ValueError(f"error norm exponent must be >= 2, got {p_bar}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if not 0.0 < h_ref <= 1.0:
        raise ValueError(f"reference step must lie in (0,1], got {h_ref}")
    if reference not in ("fine", "exact"):
        raise ValueError(f"reference must be 'fine' or 'exact', got {reference!r}")
    if reference == "exact" and problem.exact_solution is None:
        raise ValueError(f"problem '{problem.name}' has no closed-form solution")
    ladder = sorted(set(float(h) for h in ladder), reverse=True)
    if not ladder:
        raise ValueError("ladder must contain at least one step size")
    if any(not 0.0 < h <= 1.0 for h in ladder):
        raise ValueError("ladder entries must lie in (0,1]")
    ks = ladder_factors(ladder, h_ref)
    threads = max(1, int(threads))
    chunk_size = max(1, int(chunk_size))

    err = np.empty((len(ladder), M))
    sup_sq = np.empty((len(ladder), M))
    blown = np.zeros((len(ladder), M), dtype=bool)
    chunks = [np.arange(lo, min(lo + chunk_size, M)) for lo in range(0, M, chunk_size)]

    def work(indices):
        _chunk_worker(
            problem, trunc_cfg, model, ks, ladder, h_ref, seed, indices,
            scheme_tag, reference, skip_blowups, max_nodes, err, sup_sq, blown,
        )

    if threads == 1 or len(chunks) == 1:
        for indices in chunks:
            work(indices)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, indices) for indices in chunks]
            for fut in futures:
                fut.result()

    rows = []
    for lvl, (h_lvl, _) in enumerate(zip(ladder, ks)):
        ok = ~blown[lvl]
        m_ok = int(ok.sum())
        if m_ok == 0:
            raise NumericOverflowError(f"all trajectories diverged at h={h_lvl:g}")
        e = err[lvl, ok]
        powered = e**p_bar
        e_hat = float(np.mean(powered) ** (1.0 / p_bar))
        if m_ok > 1 and e_hat > 0.0:
            se = float(np.std(powered, ddof=1) / math.sqrt(m_ok) * e_hat ** (1.0 - p_bar) / p_bar)
        else:
            se = 0.0
        rows.append(
            ErrorRow(
                h=h_lvl,
                m=m_ok,
                p_bar=p_bar,
                error=e_hat,
                stderr=se,
                mean_sup_sq=float(np.mean(sup_sq[lvl, ok])),
                blowups=M - m_ok,
            )
        )
    return ErrorTable(
        rows=rows,
        problem=problem.name,
        subordinator=model.describe(),
        scheme=scheme_tag.value,
        seed=seed,
        h_ref=h_ref,
        p_bar=p_bar,
    )


def fit_convergence_order(table: ErrorTable) -> RegressionResult:
    """Least-squares slope of log10 error against log10 h."""
    if len(table.rows) < 2:
        raise ValueError("need at least two ladder rows to fit an order")
    for row in table.rows:
        if not (row.error > 0.0 and math.isfinite(row.error)):
            raise ValueError(
                f"row h={row.h:g} has non-positive or non-finite error {row.error}; "
                "cannot fit a log-log slope"
            )
    x = np.log10([row.h for row in table.rows])
    y = np.log10([row.error for row in table.rows])
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return RegressionResult(slope=float(slope), intercept=float(intercept), residuals=residuals)
