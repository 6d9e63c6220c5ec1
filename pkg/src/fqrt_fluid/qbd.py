"""The queue-difference process at a frozen fluid state, solved as a QBD.

Above zero and at or below zero the difference jumps by +-j and +-k at
constant rates, so the chain is level-homogeneous once states are grouped
into levels of m = max(j, k) positive and m nonpositive states:

    level n = {n*m + 1, ..., n*m + m}  and  {-n*m, ..., -n*m - (m - 1)}

Phases 0..m-1 hold the positive states, m..2m-1 the nonpositive ones.  The
blocks A0 (one level out), A1 (same level) and A2 (one level in) are then
block diagonal in the two halves; the halves only talk to each other
through the level-0 block B.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (DriftDegenerate, NonConvergent, SingularBoundary,
                     TruncationInsufficient)
from .model import (BoundarySub, DriftPair, FluidState, FtspRates, ModelParams,
                    RegionTag, classify, drift_from_rates, drift_pair,
                    ftsp_rates)

__all__ = [
    "FtspRates", "ftsp_rates", "QbdBlocks", "QbdSolution", "Recurrence",
    "build_blocks", "state_to_level_phase", "recurrence_check",
    "recurrence_check_matrix", "matrix_drifts", "solve_qbd", "pi12",
    "qbd_pi12", "pi12_bd_closed_form", "truncated_oracle_pi12", "blocks_to_json",
]

LR_TOL = 1e-12
LR_MAX_ITER = 60
LR_STALL_TOL = 1e-9
NEAR_EDGE = 1e-10


class Recurrence(str, Enum):
    PositiveRecurrent = "PositiveRecurrent"
    NullOrTransientUp = "NullOrTransientUp"
    NullOrTransientDown = "NullOrTransientDown"


@dataclass(frozen=True)
class QbdBlocks:
    m: int
    B: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    # gcd of the jump sizes; above 1 the lattice splits into g closed classes
    g: int = 1

    def level0_class_mask(self) -> np.ndarray:
        """Level-0 phases whose states lie in the class of state 0."""
        m = self.m
        states = np.concatenate([np.arange(1, m + 1), -np.arange(m)])
        return states % self.g == 0

    def half(self, name: str, sign: str) -> np.ndarray:
        """Sub-block of A0/A1/A2 for the positive ('+') or nonpositive ('-') half."""
        block = getattr(self, name)
        m = self.m
        return block[:m, :m] if sign == "+" else block[m:, m:]

    @property
    def B_mu(self) -> np.ndarray:
        """Level-0 jumps from the positive half down into the nonpositive half."""
        return self.B[:self.m, self.m:]

    @property
    def B_lam(self) -> np.ndarray:
        """Level-0 jumps from the nonpositive half up into the positive half."""
        return self.B[self.m:, :self.m]


@dataclass(frozen=True)
class QbdSolution:
    recurrence: Recurrence
    R: np.ndarray
    G: np.ndarray
    U: np.ndarray
    alpha0: np.ndarray
    pi12: float
    spectral_radius_R: float
    iterations: int


def state_to_level_phase(s: int, m: int):
    if s > 0:
        return (s - 1) // m, (s - 1) % m
    return (-s) // m, m + (-s) % m


def _level_phase_arrays(s: np.ndarray, m: int):
    pos = s > 0
    level = np.where(pos, (s - 1) // m, (-s) // m)
    phase = np.where(pos, (s - 1) % m, m + (-s) % m)
    return level, phase


def _level_blocks(level: int, rates: FtspRates, j: int, k: int, m: int):
    """Generator rows of one level, split by destination level (level-1, level, level+1)."""
    s = np.concatenate([level * m + 1 + np.arange(m), -level * m - np.arange(m)])
    _, row = _level_phase_arrays(s, m)
    steps = np.array([k, j, -k, -j])
    plus = np.array([rates.lam_k_plus, rates.lam_j_plus, rates.mu_k_plus, rates.mu_j_plus])
    minus = np.array([rates.lam_k_minus, rates.lam_j_minus, rates.mu_k_minus, rates.mu_j_minus])
    rate = np.where((s > 0)[:, None], plus[None, :], minus[None, :])
    dest_level, col = _level_phase_arrays(s[:, None] + steps[None, :], m)
    rows = np.broadcast_to(row[:, None], col.shape)
    out = {}
    for d in (level - 1, level, level + 1):
        block = np.zeros((2 * m, 2 * m))
        sel = dest_level == d
        np.add.at(block, (rows[sel], col[sel]), rate[sel])
        out[d] = block
    out[level][row, row] -= rate.sum(axis=1)
    return out


def build_blocks(rates: FtspRates, j: int, k: int) -> QbdBlocks:
    m = max(j, k)
    lvl0 = _level_blocks(0, rates, j, k, m)
    lvl1 = _level_blocks(1, rates, j, k, m)
    A0 = lvl1[2]
    assert np.array_equal(lvl0[1], A0)
    return QbdBlocks(m=m, B=lvl0[0], A0=A0, A1=lvl1[1], A2=lvl1[0], g=math.gcd(j, k))


def recurrence_from_drift(d: DriftPair) -> Recurrence:
    tol = 1e-9 * d.gap
    if d.delta_plus >= -tol:
        return Recurrence.NullOrTransientUp
    if d.delta_minus <= tol:
        return Recurrence.NullOrTransientDown
    return Recurrence.PositiveRecurrent


def recurrence_check(x: FluidState, p: ModelParams) -> Recurrence:
    return recurrence_from_drift(drift_pair(x, p))


def _phase_stationary(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    M = A.T.copy()
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(M, rhs)


def matrix_drifts(blocks: QbdBlocks) -> DriftPair:
    """Drifts recovered from the blocks through the phase-stationary vectors.

    For each half, nu*A0*1 - nu*A2*1 is the mean level drift; multiplying by m
    turns it back into lattice units.
    """
    m = blocks.m
    ones = np.ones(m)
    out = []
    for sign in "+-":
        A0, A1, A2 = (blocks.half(n, sign) for n in ("A0", "A1", "A2"))
        nu = _phase_stationary(A0 + A1 + A2)
        out.append(m * (nu @ A0 @ ones - nu @ A2 @ ones))
    # moving up a level in the nonpositive half means the difference decreases
    return DriftPair(delta_plus=out[0], delta_minus=-out[1])


def recurrence_check_matrix(blocks: QbdBlocks) -> Recurrence:
    return recurrence_from_drift(matrix_drifts(blocks))


def _log_reduction(A0, A1, A2):
    n = A1.shape[0]
    c = np.max(np.abs(np.diag(A1)))
    I = np.eye(n)
    up, local, down = A0 / c, A1 / c + I, A2 / c
    ones = np.ones(n)
    HL = np.linalg.solve(I - local, np.hstack([up, down]))
    H, L = HL[:, :n], HL[:, n:]
    G = L.copy()
    T = H.copy()
    res = np.inf
    for it in range(1, LR_MAX_ITER + 1):
        W = I - (H @ L + L @ H)
        HL = np.linalg.solve(W, np.hstack([H @ H, L @ L]))
        H, L = HL[:, :n], HL[:, n:]
        step = T @ L
        G = G + step
        T = T @ H
        res = np.max(np.abs(ones - G @ ones))
        if res <= LR_TOL:
            return G, it
        # near the edge of A round-off leaves G1 a little off 1 while the
        # iteration has nothing left to add; accept if that floor is small
        if np.max(step) < 1e-17 and np.max(T) < 1e-17 and res <= LR_STALL_TOL:
            return G, it
        if not np.isfinite(res):
            break
    raise NonConvergent(
        f"logarithmic reduction did not converge in {LR_MAX_ITER} iterations "
        f"(residual {res:.3e})")


def _left_null_vector(M: np.ndarray) -> np.ndarray:
    _, s, vh = np.linalg.svd(M.T)
    scale = s[0]
    if s[-1] > 1e-8 * scale:
        raise SingularBoundary(f"boundary system is not singular (smallest singular value {s[-1]:.3e})")
    if s[-2] <= 1e-12 * scale:
        raise SingularBoundary("boundary system has a null space of dimension > 1")
    v = vh[-1]
    return v if v.sum() >= 0 else -v


def _solve(blocks: QbdBlocks, diagnostics: bool):
    A0, A1, A2, B = blocks.A0, blocks.A1, blocks.A2, blocks.B
    n = A1.shape[0]
    I = np.eye(n)
    G, iters = _log_reduction(A0, A1, A2)
    U = A1 + A0 @ G
    R = np.linalg.solve(-U.T, A0.T).T
    M = B + R @ A2
    alpha0 = np.zeros(n)
    if blocks.g == 1:
        alpha0[:] = _left_null_vector(M)
    else:
        # classes do not communicate, so keep the one holding state 0
        mask = blocks.level0_class_mask()
        alpha0[mask] = _left_null_vector(M[np.ix_(mask, mask)])
    ones_plus = np.zeros(n)
    ones_plus[:blocks.m] = 1.0
    y = np.linalg.solve(I - R, np.column_stack([np.ones(n), ones_plus]))
    alpha0 = alpha0 / (alpha0 @ y[:, 0])
    pi = min(max(float(alpha0 @ y[:, 1]), 0.0), 1.0)
    if not diagnostics:
        return pi
    rho = float(np.max(np.abs(np.linalg.eigvals(R))))
    return QbdSolution(Recurrence.PositiveRecurrent, R, G, U, alpha0, pi, rho, iters)


def solve_qbd(blocks: QbdBlocks) -> QbdSolution:
    """Matrix-geometric solution: G by logarithmic reduction, then R and alpha0."""
    rec = recurrence_check_matrix(blocks)
    if rec is not Recurrence.PositiveRecurrent:
        raise DriftDegenerate(f"QBD is not positive recurrent ({rec.value})")
    return _solve(blocks, diagnostics=True)


def _lattice(p: ModelParams, lattice):
    if lattice is None:
        return p.j, p.k
    J, K = lattice
    if J <= 0 or K <= 0 or J * p.k != K * p.j:
        raise ValueError(f"lattice {lattice} does not represent r = {p.j}/{p.k}")
    return J, K


def qbd_pi12(x: FluidState, p: ModelParams, pool1_rate: float | None = None,
             lattice: tuple[int, int] | None = None) -> float:
    """QBD value of pi12 at a state where the difference process is recurrent.

    ``lattice`` = (J, K) builds the chain with jumps +-J, +-K instead of
    +-j, +-k; any common multiple of (j, k) describes the same ratio.
    """
    J, K = _lattice(p, lattice)
    rates = ftsp_rates(x, p, pool1_rate)
    d = drift_from_rates(rates, J, K)
    if recurrence_from_drift(d) is not Recurrence.PositiveRecurrent:
        raise DriftDegenerate(f"difference process is not positive recurrent at {x}")
    edge = min(abs(d.delta_plus), d.delta_minus) / d.gap
    if edge < NEAR_EDGE:
        return 1.0 if abs(d.delta_plus) <= d.delta_minus else 0.0
    return _solve(build_blocks(rates, J, K), diagnostics=False)


def pi12(x: FluidState, p: ModelParams, pool1_rate: float | None = None,
         lattice: tuple[int, int] | None = None) -> float:
    """Share of pool-2 capacity given to class 1 by the fast process at x."""
    region = classify(x, p, pool1_rate)
    if region.tag is RegionTag.SPlus:
        return 1.0
    if region.tag is RegionTag.SMinus:
        return 0.0
    if region.sub is BoundarySub.A:
        return qbd_pi12(x, p, pool1_rate, lattice)
    if region.sub in (BoundarySub.APlusStrict, BoundarySub.APlusZero):
        return 1.0
    return 0.0


def pi12_bd_closed_form(x: FluidState, p: ModelParams) -> float:
    """pi12 when r = 1, where the difference is a birth-death process."""
    if (p.j, p.k) != (1, 1):
        raise ValueError(f"closed form needs j = k = 1, got ({p.j}, {p.k})")
    d = drift_pair(x, p)
    if d.delta_minus <= 0 or d.delta_plus >= 0:
        raise DriftDegenerate(
            f"need delta_minus > 0 > delta_plus, got ({d.delta_plus!r}, {d.delta_minus!r})")
    return d.delta_minus / d.gap


def truncated_oracle_pi12(x: FluidState, p: ModelParams, level_cap: int = 200,
                          lattice: tuple[int, int] | None = None) -> float:
    """pi12 from one sparse linear solve on levels 0..level_cap.

    Upward jumps out of the top level are folded back into it, so the
    truncated generator stays conservative.
    """
    J, K = _lattice(p, lattice)
    rates = ftsp_rates(x, p)
    if recurrence_from_drift(drift_from_rates(rates, J, K)) is not Recurrence.PositiveRecurrent:
        raise DriftDegenerate("truncated oracle needs a positive recurrent state")
    blk = build_blocks(rates, J, K)
    L = level_cap
    m = blk.m
    size = 2 * m
    # block tridiagonal: A0 above, A1 on and A2 below the diagonal, with the
    # boundary block at level 0 and the folded block at level L
    up = sp.eye(L + 1, k=1, format="csr")
    mid = sp.diags(np.r_[0.0, np.ones(L - 1), 0.0], format="csr")
    Q = (sp.kron(up, blk.A0) + sp.kron(mid, blk.A1) + sp.kron(up.T, blk.A2)
         + sp.kron(sp.csr_matrix(([1.0], ([0], [0])), shape=(L + 1, L + 1)), blk.B)
         + sp.kron(sp.csr_matrix(([1.0], ([L], [L])), shape=(L + 1, L + 1)), blk.A1 + blk.A0))
    Q = Q.tocsr()
    lvl = np.repeat(np.arange(L + 1), size)
    ph = np.tile(np.arange(size), L + 1)
    state = np.where(ph < m, lvl * m + ph + 1, -lvl * m - (ph - m))
    keep = np.flatnonzero(state % blk.g == 0)
    Q = Q[keep][:, keep]
    n = Q.shape[0]
    # balance equations with the first one swapped for the normalisation
    M = sp.vstack([sp.csr_matrix(np.ones((1, n))), Q.T.tocsr()[1:]], format="csc")
    rhs = np.zeros(n)
    rhs[0] = 1.0
    prob = np.zeros(size * (L + 1))
    prob[keep] = spla.spsolve(M, rhs)
    top = prob[(L - 1) * size:].sum()
    if top > 1e-8:
        raise TruncationInsufficient(
            f"mass {top:.3e} in the top two levels of {L + 1}; raise level_cap")
    return float(prob.reshape(L + 1, size)[:, :m].sum())


def blocks_to_json(blocks: QbdBlocks, solution: QbdSolution | None = None) -> str:
    """Matrices keyed by name as row-major nested lists."""
    out = {"m": blocks.m}
    for name in ("B", "A0", "A1", "A2"):
        out[name] = getattr(blocks, name).tolist()
    if solution is not None:
        out.update(R=solution.R.tolist(), G=solution.G.tolist(), U=solution.U.tolist(),
                   alpha0=solution.alpha0.tolist(), pi12=solution.pi12)
    return json.dumps(out)
