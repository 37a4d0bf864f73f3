"""Independent brute-force references used by the tests.

Everything here loops over explicit joint actions in plain Python so it shares
no code path with the vectorised library.
"""

import itertools
import math

import numpy as np


def compositions(c, f):
    """All f-tuples of nonnegative ints summing to c, by filtering the full grid."""
    return sorted(t for t in itertools.product(range(c + 1), repeat=f) if sum(t) == c)


def blotto_reference(profile):
    """Direct rule application for one pure profile (list of allocations)."""
    n = len(profile)
    f = len(profile[0])
    wins = [0] * n
    for k in range(f):
        coins = [a[k] for a in profile]
        top = max(coins)
        holders = [i for i in range(n) if coins[i] == top]
        if len(holders) == 1:
            wins[holders[0]] += 1
    best = max(wins)
    winners = [i for i in range(n) if wins[i] == best]
    if len(winners) == n:
        return [0.0] * n
    losers = n - len(winners)
    return [1.0 / len(winners) if i in winners else -1.0 / losers for i in range(n)]


def joint_actions(action_counts):
    return itertools.product(*(range(k) for k in action_counts))


def expected_rewards(tensor, player, opponent_dist):
    """Reward of each action of ``player`` against a dict {joint action: prob}.

    The ``player`` entry of each joint key is ignored.
    """
    m = tensor.shape[1 + player]
    out = [0.0] * m
    for joint, p in opponent_dist.items():
        for a in range(m):
            j = list(joint)
            j[player] = a
            out[a] += p * tensor[(player,) + tuple(j)]
    return np.array(out)


def product_distribution(probs):
    dist = {}
    for joint in joint_actions([len(p) for p in probs]):
        w = math.prod(probs[i][a] for i, a in enumerate(joint))
        if w > 0:
            dist[joint] = dist.get(joint, 0.0) + w
    return dist


def joint_value(tensor, dist, player):
    return sum(p * tensor[(player,) + joint] for joint, p in dist.items())


def best_response(tensor, player, dist):
    r = expected_rewards(tensor, player, dist)
    best = max(r)
    return min(a for a in range(len(r)) if r[a] >= best - 1e-12), best


def nashconv(tensor, probs):
    dist = product_distribution(probs)
    total = 0.0
    for i in range(tensor.shape[0]):
        r = expected_rewards(tensor, i, dist)
        total += max(r) - joint_value(tensor, dist, i)
    return total


def ccedist(tensor, dist):
    total = 0.0
    gains = []
    for i in range(tensor.shape[0]):
        r = expected_rewards(tensor, i, dist)
        g = max(r) - joint_value(tensor, dist, i)
        gains.append(g)
        total += max(0.0, g)
    return total, gains


def tabular_fp(a, b, T):
    """Simultaneous fictitious play on a bimatrix game (a for the row player, b for the column).

    Starts from uniform play counted as one observation; lowest-index ties.
    Returns the average strategies after T responses.
    """
    m, n = a.shape
    row_sum = [1.0 / m] * m
    col_sum = [1.0 / n] * n
    for t in range(1, T + 1):
        col_avg = [c / t for c in col_sum]
        row_avg = [r / t for r in row_sum]
        row_vals = [sum(a[i][j] * col_avg[j] for j in range(n)) for i in range(m)]
        col_vals = [sum(b[i][j] * row_avg[i] for i in range(m)) for j in range(n)]
        bi = max(range(m), key=lambda i: (row_vals[i] >= max(row_vals) - 1e-12, -i))
        bj = max(range(n), key=lambda j: (col_vals[j] >= max(col_vals) - 1e-12, -j))
        row_sum[bi] += 1
        col_sum[bj] += 1
    return np.array(row_sum) / (T + 1), np.array(col_sum) / (T + 1)


def damped_logit_fixed_point(a, b, tau, damping=0.05, iters=200_000, tol=1e-13):
    """Iterate x <- (1-d) x + d softmax(r/tau) for a bimatrix game until it stops moving."""
    m, n = a.shape
    x = np.full(m, 1.0 / m)
    y = np.full(n, 1.0 / n)
    for _ in range(iters):
        rx = a @ y
        ry = x @ b
        sx = np.exp((rx - rx.max()) / tau)
        sy = np.exp((ry - ry.max()) / tau)
        nx = (1 - damping) * x + damping * sx / sx.sum()
        ny = (1 - damping) * y + damping * sy / sy.sum()
        if max(abs(nx - x).max(), abs(ny - y).max()) < tol:
            return nx, ny
        x, y = nx, ny
    return x, y
