"""Slow, loop-based reference implementations used as independent test oracles.

Nothing here imports the package; each function spells its formula out
element by element.
"""
import cmath
import itertools
import math

import numpy as np


def matvec(a, x):
    m, n = len(a), len(a[0])
    return [sum(a[i][j] * x[j] for j in range(n)) for i in range(m)]


def adjoint_real(a, r):
    """``Re(sum_m conj(a[m, n]) r[m])`` for every column ``n``."""
    m, n = len(a), len(a[0])
    return [sum((complex(a[i][j]).conjugate() * complex(r[i])) for i in range(m)).real for j in range(n)]


def step_size(a, g, support):
    """``g_G . g_G / ||A_G g_G||^2`` by explicit sums."""
    num = sum(g[j] ** 2 for j in support)
    den = 0.0
    for i in range(len(a)):
        acc = sum(complex(a[i][j]) * g[j] for j in support)
        den += abs(acc) ** 2
    return num / den


def best_s_term_error(v, s):
    """Smallest ``||w - v||`` over ``s``-sparse ``w`` by enumerating supports."""
    n = len(v)
    best = math.inf
    for k in range(s + 1):
        for sup in itertools.combinations(range(n), k):
            err = math.sqrt(sum(v[j] ** 2 for j in range(n) if j not in sup))
            best = min(best, err)
    return best


def min_bits(support_size, epsilon, alpha):
    """Smallest integer ``b >= 1`` with ``sqrt(|G|) / (2**(b-1) alpha) <= epsilon``."""
    b = 1
    while math.sqrt(support_size) / (2 ** (b - 1) * alpha) > epsilon:
        b += 1
    return b


def epsilon_s(x, xs, e_norm, beta, s):
    tail = [a - b for a, b in zip(x, xs)]
    l2 = math.sqrt(sum(t * t for t in tail))
    l1 = sum(abs(t) for t in tail)
    return l2 + l1 / math.sqrt(s) + e_norm / beta


def epsilon_q(m, beta_hat, b_phi, b_y, xs_norm, c_phi, c_y):
    return math.sqrt(m) / beta_hat * (c_phi * xs_norm / 2 ** (b_phi - 1) + c_y / 2 ** (b_y - 1))


def radio_matrix_one_based(positions, r, d, autocorrelations=True):
    """Measurement matrix from 1-based indices.

    Row ``z = (i - 1) L + k`` for antennas ``i, k = 1..L`` and column
    ``w = (a - 1) r + b`` for pixel ``(a, b)``; the result is returned with
    rows and columns in increasing ``z`` and ``w``.
    """
    L = len(positions)
    h = 2 * d / (r - 1)
    coord = [(t - 1 - (r - 1) / 2) * h for t in range(1, r + 1)]
    rows = []
    for i in range(1, L + 1):
        for k in range(1, L + 1):
            if i == k and not autocorrelations:
                continue
            u = positions[i - 1][0] - positions[k - 1][0]
            v = positions[i - 1][1] - positions[k - 1][1]
            row = [0j] * (r * r)
            for a in range(1, r + 1):
                for b in range(1, r + 1):
                    w = (a - 1) * r + b
                    row[w - 1] = cmath.exp(-2j * math.pi * (u * coord[a - 1] + v * coord[b - 1]))
            rows.append(row)
    return np.array(rows)


def dirty_pixel(uv, vis, l, m):
    return sum(complex(V) * cmath.exp(2j * math.pi * (u * l + v * m)) for (u, v), V in zip(uv, vis)).real
