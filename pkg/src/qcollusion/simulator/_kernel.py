"""Compiled inner loops of the discrete process.

State layout is ``q = [Q_A^C, Q_A^D, Q_B^C, Q_B^D]``; actions are 0 (C) and
1 (D); regions are encoded ``2 * a_pref + b_pref``. The random draw order
mirrors ``agent.select_action`` exactly (player A first, then B) so that a
pure-Python replay reproduces these trajectories.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def choose(q_c, q_d, eps, rng):
    if rng.random() < eps:
        return 0 if rng.random() < 0.5 else 1
    if q_c > q_d:
        return 0
    if q_d > q_c:
        return 1
    return 0 if rng.random() < 0.5 else 1


@njit(cache=True)
def region_of(q):
    a = 0 if q[0] > q[1] else 1
    b = 0 if q[2] > q[3] else 1
    return 2 * a + b


@njit(cache=True)
def step(q, pay, gamma, alpha, eps_a, eps_b, rng):
    a = choose(q[0], q[1], eps_a, rng)
    b = choose(q[2], q[3], eps_b, rng)
    target_a = pay[a, b] + gamma * max(q[0], q[1])
    target_b = pay[b, a] + gamma * max(q[2], q[3])
    q[a] = (1.0 - alpha) * q[a] + alpha * target_a
    q[2 + b] = (1.0 - alpha) * q[2 + b] + alpha * target_b


@njit(cache=True)
def run(q, pay, gamma, alpha, eps_a, eps_b, horizon, window, rng, trace, trace_from):
    """Advance ``q`` in place for ``horizon`` steps.

    Window statistics cover the states reached by the last ``window`` steps;
    transitions pair each such state with the state before it.
    """
    counts = np.zeros(4, dtype=np.int64)
    trans = np.zeros((4, 4), dtype=np.int64)
    start = horizon - window
    for t in range(horizon):
        before = region_of(q)
        step(q, pay, gamma, alpha, eps_a, eps_b, rng)
        if t >= start:
            after = region_of(q)
            counts[after] += 1
            trans[before, after] += 1
        if t >= trace_from:
            for j in range(4):
                trace[t - trace_from, j] = q[j]
    return counts, trans


@njit(cache=True)
def increments(q0, pay, gamma, alpha, eps_a, eps_b, n, rng):
    out = np.empty((n, 4))
    q = np.empty(4)
    for i in range(n):
        for j in range(4):
            q[j] = q0[j]
        step(q, pay, gamma, alpha, eps_a, eps_b, rng)
        for j in range(4):
            out[i, j] = q[j] - q0[j]
    return out
