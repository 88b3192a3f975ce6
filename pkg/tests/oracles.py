"""Independent reference implementations used by the tests.

None of these import the code under test; they recompute the same
quantities by brute force so disagreements point at real bugs.
"""

from __future__ import annotations

import math

import numpy as np

N_ARC = 1_000_000
_ALPHA = (np.arange(N_ARC) + 0.5) * (2.0 * math.pi / N_ARC)
_COS = np.cos(_ALPHA)
_SIN = np.sin(_ALPHA)


def sampled_arc_inside_square(cx, cy, radius, h, n=N_ARC):
    """Angular measure of the circle inside [-h, h]^2 by counting sample points."""
    if n == N_ARC:
        c, s = _COS, _SIN
    else:
        a = (np.arange(n) + 0.5) * (2.0 * math.pi / n)
        c, s = np.cos(a), np.sin(a)
    x = cx + radius * c
    y = cy + radius * s
    inside = (np.abs(x) < h) & (np.abs(y) < h)
    return 2.0 * math.pi * np.count_nonzero(inside) / len(c)


def rotated_center(pivot, direction, arm_length, theta):
    """Pivot plus the arm rotated by an explicit 2x2 matrix."""
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return np.asarray(pivot, float) + arm_length * (R @ np.asarray(direction, float))


def brute_force_saturation(matrix, desired_thrusts, lo, hi, n=801):
    """Lexicographic optimum over a (T, tau_z) grid with roll/pitch held exactly.

    Returns the thrust vector minimising |T - T_des| first and
    |tau_z - tau_z_des| second, or ``None`` when no grid point is feasible.
    """
    A = np.asarray(matrix, float)
    inv = np.linalg.solve(A, np.eye(4))
    T_des, tx, ty, tz_des = A @ np.asarray(desired_thrusts, float)
    base = inv[:, 1] * tx + inv[:, 2] * ty
    t_span = 4.0 * float(np.max(hi))
    tz_span = float(np.max(np.abs(A[3]))) * t_span
    Ts = np.linspace(0.0, t_span, n)
    tzs = np.linspace(-tz_span, tz_span, n)
    TT, ZZ = np.meshgrid(Ts, tzs, indexing="ij")
    f = base[None, None, :] + TT[..., None] * inv[:, 0] + ZZ[..., None] * inv[:, 3]
    ok = np.all((f >= lo - 1e-12) & (f <= hi + 1e-12), axis=-1)
    if not ok.any():
        return None
    cost_T = np.where(ok, np.abs(TT - T_des), np.inf)
    best_T = cost_T.min()
    # everything within one grid cell of the best thrust counts as a tie
    dT = Ts[1] - Ts[0]
    tie = ok & (cost_T <= best_T + dT)
    cost_z = np.where(tie, np.abs(ZZ - tz_des) + 1e-6 * cost_T, np.inf)
    i, j = np.unravel_index(np.argmin(cost_z), cost_z.shape)
    return f[i, j], (Ts[1] - Ts[0], tzs[1] - tzs[0])


def segment_stats(t, ref, est, labels, steady_fraction=0.5, min_samples=10):
    """Per-segment statistics written with plain loops."""
    out = []
    start = 0
    n = len(labels)
    bounds = []
    for i in range(1, n + 1):
        if i == n or labels[i] != labels[start]:
            bounds.append((labels[start], start, i))
            start = i
    for label, a, b in bounds:
        length = b - a
        if length < min_samples:
            continue
        first_steady = b - int(round(length * steady_fraction))
        abs_sum = [0.0, 0.0, 0.0]
        off_sum = [0.0, 0.0, 0.0]
        for k in range(first_steady, b):
            for ax in range(3):
                d = est[k][ax] - ref[k][ax]
                abs_sum[ax] += abs(d)
                off_sum[ax] += d
        m = b - first_steady
        dists = []
        for k in range(a, b):
            dists.append(math.sqrt(sum((est[k][ax] - ref[k][ax]) ** 2 for ax in range(3))))
        mu = sum(dists) / len(dists)
        var = sum((d - mu) ** 2 for d in dists) / len(dists)
        out.append(
            {
                "label": label,
                "abs_error": [v / m for v in abs_sum],
                "offset": [v / m for v in off_sum],
                "mu": mu,
                "sigma": math.sqrt(var),
            }
        )
    return out


def x_config_mixer(h, L, c_q):
    """Closed-form mixer of the symmetric X layout (arms on the diagonals)."""
    a = h + L * math.sqrt(0.5)  # lever arm along x and y
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [a, a, -a, -a],
            [-a, a, a, -a],
            [c_q, -c_q, c_q, -c_q],
        ]
    )
