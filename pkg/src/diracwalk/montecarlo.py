"""Single-walker sampling of the master equations and the collapse observer.

Flow table (walker moves, 1-based states; each branch 1/2 at zero bias)::

    state 1: (+1,+1) -> 2   | (-1,-1) -> 4
    state 2: (-1,+1) -> 1   | (+1,-1) -> 3
    state 3: (-1,-1) -> 2   | (+1,+1) -> 4
    state 4: (+1,-1) -> 1   | (-1,+1) -> 3

The branch with ``dt = +1`` is taken with probability ``(1 + eps)/2``.

Random numbers come from per-walker SplitMix64 streams.  Walker ``w`` under
seed ``s`` starts from ``key_w = mix64(mix64(s) + GAMMA64 * (w + 1))`` and its
draw for ordinal step ``lam`` is ``mix64(key_w + GAMMA64 * (lam + 1))``; the
top 53 bits give a uniform in ``[0, 1)``.  Streams are therefore independent
of how many walkers run or in which order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transitions import canonical_transitions

__all__ = [
    "EnsembleSummary",
    "FLOW_TABLE",
    "ObservationRecord",
    "RNG_NAME",
    "Trajectory",
    "Walker",
    "alternation_check",
    "observe_collapse",
    "run_ensemble",
    "sparse_histogram",
    "stream_uniforms",
    "step_walker",
    "total_variation",
    "visited_fraction",
]

RNG_NAME = "splitmix64-counter"
GAMMA64 = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# source state -> ((dt, dx, dest) forward, (dt, dx, dest) backward); forward means dt = +1
FLOW_TABLE = {
    1: ((1, 1, 2), (-1, -1, 4)),
    2: ((1, -1, 3), (-1, 1, 1)),
    3: ((1, 1, 4), (-1, -1, 2)),
    4: ((1, -1, 1), (-1, 1, 3)),
}

_FWD = np.array([[0, 0, 0]] + [list(FLOW_TABLE[s][0]) for s in (1, 2, 3, 4)], dtype=np.int64)
_BWD = np.array([[0, 0, 0]] + [list(FLOW_TABLE[s][1]) for s in (1, 2, 3, 4)], dtype=np.int64)


def _flow_table_from_matrices():
    """Rebuild the flow table from the hop matrices (used as a cross-check)."""
    table = {}
    for b in canonical_transitions().branches():
        table.setdefault(b.source + 1, []).append((b.dt, b.dx, b.dest + 1))
    return {s: tuple(sorted(v, key=lambda r: -r[0])) for s, v in table.items()}


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _stream_keys(seed: int, walkers: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        base = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
        return _mix64(base + GAMMA64 * (walkers.astype(np.uint64) + np.uint64(1)))


def stream_uniforms(keys: np.ndarray, lam: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = _mix64(keys + GAMMA64 * np.uint64(lam + 1))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class Walker:
    t_index: int
    x_index: int
    state: int
    lam: int = 0

    def __post_init__(self):
        if self.state not in (1, 2, 3, 4):
            raise ValueError(f"state must be 1..4, got {self.state}")


def step_walker(w: Walker, epsilon: float, rng, nt: int | None = None, nx: int | None = None) -> Walker:
    """One ordinal step; ``rng`` is a numpy Generator or a uniform in [0, 1)."""
    u = rng if isinstance(rng, float) else float(rng.random())
    dt, dx, dest = FLOW_TABLE[w.state][0 if u < (1 + epsilon) / 2 else 1]
    t, x = w.t_index + dt, w.x_index + dx
    if nt:
        t %= nt
    if nx:
        x %= nx
    return Walker(t, x, dest, w.lam + 1)


@dataclass(frozen=True)
class Trajectory:
    lam: np.ndarray
    t: np.ndarray
    x: np.ndarray
    state: np.ndarray

    def __len__(self):
        return len(self.lam)

    def records(self):
        return [Walker(int(t), int(x), int(s), int(l))
                for l, t, x, s in zip(self.lam, self.t, self.x, self.state)]

    @classmethod
    def from_records(cls, recs) -> "Trajectory":
        recs = list(recs)
        return cls(
            np.array([r.lam for r in recs]),
            np.array([r.t_index for r in recs]),
            np.array([r.x_index for r in recs]),
            np.array([r.state for r in recs]),
        )


def _wrap_delta(d, n):
    if n is None:
        return d
    return (d + n // 2) % n - n // 2


@dataclass(frozen=True)
class AlternationResult:
    passed: bool
    first_violation: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.passed


def alternation_check(traj: Trajectory, nt: int | None = None, nx: int | None = None) -> AlternationResult:
    """Hops are light-cone diagonals that alternate between the two diagonals.

    Also checks the state classes {1,3} / {2,4} alternate and every move is
    a row of the flow table.  ``nt``/``nx`` undo periodic wrap when given.
    """
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two records")
    dts = _wrap_delta(np.diff(traj.t), nt)
    dxs = _wrap_delta(np.diff(traj.x), nx)
    prev_diag = None
    for i, (dt, dx) in enumerate(zip(dts, dxs)):
        s0, s1 = int(traj.state[i]), int(traj.state[i + 1])
        if abs(dt) != 1 or abs(dx) != 1:
            return AlternationResult(False, i, "hop is not on the light cone")
        diag = int(dt * dx)
        if prev_diag is not None and diag == prev_diag:
            return AlternationResult(False, i, "two consecutive hops on the same diagonal")
        prev_diag = diag
        if (s0 % 2) == (s1 % 2):
            return AlternationResult(False, i, "state class did not alternate")
        if (int(dt), int(dx), s1) not in FLOW_TABLE.get(s0, ()):
            return AlternationResult(False, i, "move is not in the flow table")
    return AlternationResult(True)


@dataclass
class EnsembleSummary:
    n_walkers: int
    Lambda: int
    epsilon: float
    seed: int
    nt: int
    nx: int
    histograms: dict  # lam -> int64 array (4, nt, nx) of counts
    trajectories: list = field(default_factory=list)
    forward_steps: int = 0
    total_steps: int = 0
    hop_violations: int = 0
    alternation_violations: int = 0
    final: np.ndarray | None = None  # (n_walkers, 3) rows of t, x, state at Lambda

    def frequencies(self, lam: int) -> np.ndarray:
        return self.histograms[lam] / self.n_walkers


def run_ensemble(n_walkers: int, Lambda: int, init: Walker, epsilon: float, seed: int,
                 nt: int, nx: int, record_lambdas=None, store_trajectories: int = 0,
                 max_trajectory_bytes: int = 256 * 2**20, chunk: int = 1 << 16) -> EnsembleSummary:
    """Run independent walkers from ``init`` on a periodic ``nt x nx`` lattice.

    Histograms are kept for ``record_lambdas`` (default: only ``Lambda``).
    Walkers are processed in chunks; counts are summed so the result does not
    depend on the chunk size.
    """
    if n_walkers < 1:
        raise ValueError("need at least one walker")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    lams = sorted(set([Lambda] if record_lambdas is None else record_lambdas))
    if any(l < 0 or l > Lambda for l in lams):
        raise ValueError("record_lambdas must lie in [0, Lambda]")
    n_store = min(store_trajectories, n_walkers)
    if n_store * (Lambda + 1) * 3 * 8 > max_trajectory_bytes:
        raise MemoryError(
            f"storing {n_store} trajectories of length {Lambda + 1} exceeds {max_trajectory_bytes} bytes"
        )
    hists = {l: np.zeros((4, nt, nx), dtype=np.int64) for l in lams}
    summary = EnsembleSummary(n_walkers, Lambda, epsilon, seed, nt, nx, hists)
    p_fwd = (1 + epsilon) / 2
    store_t = np.empty((n_store, Lambda + 1), dtype=np.int64)
    store_x = np.empty_like(store_t)
    store_s = np.empty_like(store_t)
    final = np.empty((n_walkers, 3), dtype=np.int64)

    for lo in range(0, n_walkers, chunk):
        idx = np.arange(lo, min(lo + chunk, n_walkers))
        keys = _stream_keys(seed, idx)
        t = np.full(idx.size, init.t_index % nt, dtype=np.int64)
        x = np.full(idx.size, init.x_index % nx, dtype=np.int64)
        s = np.full(idx.size, init.state, dtype=np.int64)
        prev_diag = np.zeros(idx.size, dtype=np.int64)
        keep = idx < n_store
        for lam in range(Lambda + 1):
            if lam in hists:
                np.add.at(hists[lam], (s - 1, t, x), 1)
            if keep.any():
                store_t[idx[keep], lam] = t[keep]
                store_x[idx[keep], lam] = x[keep]
                store_s[idx[keep], lam] = s[keep]
            if lam == Lambda:
                break
            fwd = stream_uniforms(keys, lam) < p_fwd
            move = np.where(fwd[:, None], _FWD[s], _BWD[s])
            dt, dx, s_new = move[:, 0], move[:, 1], move[:, 2]
            summary.forward_steps += int(fwd.sum())
            summary.total_steps += idx.size
            summary.hop_violations += int(((np.abs(dt) != 1) | (np.abs(dx) != 1)).sum())
            diag = dt * dx
            summary.alternation_violations += int(
                ((diag == prev_diag) | ((s % 2) == (s_new % 2))).sum()
            )
            prev_diag = diag
            t = (t + dt) % nt
            x = (x + dx) % nx
            s = s_new
        final[idx] = np.stack([t, x, s], axis=1)

    summary.final = final
    lam_axis = np.arange(Lambda + 1)
    summary.trajectories = [
        Trajectory(lam_axis.copy(), store_t[i], store_x[i], store_s[i]) for i in range(n_store)
    ]
    return summary


def sparse_histogram(final: np.ndarray):
    """Occupied sites of the final positions as rows ``(t, x, f1, f2, f3, f4)``.

    Rows are sorted by ``(t, x)``; frequencies are counts over walkers.
    """
    n = len(final)
    sites, inv = np.unique(final[:, :2], axis=0, return_inverse=True)
    counts = np.zeros((len(sites), 4), dtype=np.int64)
    np.add.at(counts, (inv.ravel(), final[:, 2] - 1), 1)
    return [(int(t), int(x), *(c / n for c in row)) for (t, x), row in zip(sites, counts)]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * math.fsum(np.abs(np.asarray(p) - np.asarray(q)).ravel())


@dataclass(frozen=True)
class ObservationRecord:
    """Dirac-time slice -> (x of the latest-ordinal visit, that ordinal time)."""

    entries: dict

    def rows(self):
        return [(t, x, lam) for t, (x, lam) in sorted(self.entries.items())]

    def __len__(self):
        return len(self.entries)


def observe_collapse(traj: Trajectory) -> ObservationRecord:
    """For every visited time slice keep the position with the largest ordinal time."""
    order = np.argsort(traj.lam, kind="stable")
    entries = {}
    for i in order:
        entries[int(traj.t[i])] = (int(traj.x[i]), int(traj.lam[i]))
    return ObservationRecord(entries)


def visited_fraction(rec: ObservationRecord, t_lo: int, t_hi: int) -> float:
    """Fraction of slices ``t_lo..t_hi`` (inclusive) carrying an observation."""
    if t_hi < t_lo:
        return math.nan
    n = t_hi - t_lo + 1
    return sum(1 for t in range(t_lo, t_hi + 1) if t in rec.entries) / n
