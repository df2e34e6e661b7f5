"""Pure NumPy Jacobi kernel, used when the compiled extension is absent.

Same contract as ``_jacobi_cy.jacobi_sweeps``.  To stay fast without C, each
sweep is organized in round-robin rounds of pairwise disjoint (p, q) planes,
so all rotations of a round are applied with vectorized gather/scatter
updates.  Disjoint planes commute, hence a round equals the sequential
application of its rotations computed from the pre-round matrix, and every
pivot of the round is zeroed exactly.
"""

import numpy as np

_SCHEDULES: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}


def _round_robin(n):
    """Rounds of disjoint index pairs covering all (p, q), p < q, once."""
    players = list(range(n))
    if n % 2:
        players.append(-1)  # bye
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = []
        for i in range(size // 2):
            x, y = players[i], players[size - 1 - i]
            if x >= 0 and y >= 0:
                pairs.append((min(x, y), max(x, y)))
        pairs.sort()
        rounds.append(
            (np.array([p for p, _ in pairs], dtype=np.intp),
             np.array([q for _, q in pairs], dtype=np.intp))
        )
        # circle method: fix players[0], rotate the rest
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _schedule(n):
    sched = _SCHEDULES.get(n)
    if sched is None:
        sched = _round_robin(n)
        _SCHEDULES[n] = sched
    return sched


def jacobi_sweeps(a, tol, max_sweeps):
    """Diagonalize symmetric ``a`` in place; returns the sweep count."""
    n = a.shape[0]
    if n < 2:
        return 0
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        if np.max(np.abs(a[iu])) <= tol:
            return sweep
        for p_all, q_all in _schedule(n):
            apq = a[p_all, q_all]
            active = apq != 0.0
            if not active.any():
                continue
            pi = p_all[active]
            qi = q_all[active]
            apq = apq[active]
            theta = (a[qi, qi] - a[pi, pi]) / (2.0 * apq)
            t = 1.0 / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            np.negative(t, where=theta < 0.0, out=t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rows_p = a[pi, :]
            rows_q = a[qi, :]
            a[pi, :] = c[:, None] * rows_p - s[:, None] * rows_q
            a[qi, :] = s[:, None] * rows_p + c[:, None] * rows_q
            cols_p = a[:, pi]
            cols_q = a[:, qi]
            a[:, pi] = cols_p * c[None, :] - cols_q * s[None, :]
            a[:, qi] = cols_p * s[None, :] + cols_q * c[None, :]
            a[pi, qi] = 0.0
            a[qi, pi] = 0.0
    return max_sweeps
