"""Brute-force reference implementations used only by the tests."""
import itertools
import math

import numpy as np


def lasso_oracle(x, D, lam):
    """min_c ||x - c D||^2 + lam |c|_1 by enumerating the 3^l sign patterns.

    For a fixed sign vector s (zeros pinned), the objective is a quadratic
    whose stationary point solves G_SS c_S = b_S - lam/2 s_S; keep the
    solutions whose signs agree with s.
    """
    x, D = np.asarray(x, float), np.asarray(D, float)
    l = D.shape[0]
    G, b = D @ D.T, D @ x
    best = float(x @ x)
    for signs in itertools.product((-1, 0, 1), repeat=l):
        s = np.array(signs, dtype=float)
        S = np.flatnonzero(s)
        if S.size == 0:
            continue
        GS = G[np.ix_(S, S)]
        if abs(np.linalg.det(GS)) < 1e-12:
            sol = np.linalg.lstsq(GS, b[S] - lam / 2 * s[S], rcond=None)[0]
        else:
            sol = np.linalg.solve(GS, b[S] - lam / 2 * s[S])
        if np.any(np.sign(sol) != s[S]):
            continue
        c = np.zeros(l)
        c[S] = sol
        r = x - c @ D
        best = min(best, float(r @ r + lam * np.abs(c).sum()))
    return best


def rqa_oracle(points, radius, min_len):
    """RQA measures by enumerating every candidate segment explicitly.

    A segment is a maximal all-recurrent stretch in the upper triangle; it
    counts when its length is >= min_len or it fills its whole line.
    """
    n = len(points)

    def rec(i, j):
        if i == j:
            return False
        (xa, ya), (xb, yb) = points[i], points[j]
        return math.hypot(xa - xb, ya - yb) <= radius

    upper = [(i, j) for i in range(n) for j in range(i + 1, n) if rec(i, j)]
    R = len(upper)
    if R == 0:
        return (0.0, 0.0, 0.0, 0.0)

    def count(lines):
        total = 0
        for line in lines:
            flags = [rec(i, j) for i, j in line]
            for a in range(len(line)):
                for b in range(a + 1, len(line) + 1):
                    if not all(flags[a:b]):
                        continue
                    left_ok = a == 0 or not flags[a - 1]
                    right_ok = b == len(line) or not flags[b - 1 + 1] if b < len(line) else True
                    if left_ok and right_ok and (b - a >= min_len or b - a == len(line)):
                        total += b - a
        return total

    diagonals = [[(i, i + k) for i in range(n - k)] for k in range(1, n)]
    rows = [[(i, j) for j in range(i + 1, n)] for i in range(n - 1)]
    cols = [[(i, j) for i in range(j)] for j in range(1, n)]
    lag = sum(j - i for i, j in upper)
    return (100.0 * 2 * R / (n * (n - 1)),
            100.0 * count(diagonals) / R,
            100.0 * (count(rows) + count(cols)) / (2 * R),
            100.0 * lag / ((n - 1) * R))


def monotone_paths(n, m):
    """Every lattice path (0,0) -> (n-1,m-1) with steps (1,0), (0,1), (1,1)."""
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                for rest in walk(i + di, j + dj):
                    yield [(i, j)] + rest
    return list(walk(0, 0))
