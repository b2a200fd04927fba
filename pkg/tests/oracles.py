"""Reference computations written from coordinate geometry, independent of the package."""
import numpy as np


def positions(N, wavelength):
    d = wavelength / 2
    return (np.arange(1, N + 1) - (N + 1) / 2) * d


def geo_distances(theta, r, N, wavelength):
    x, y = r * np.sqrt(1 - theta**2), r * theta
    return np.hypot(x, y - positions(N, wavelength))


def geo_steering(theta, r, N, wavelength):
    rn = geo_distances(theta, r, N, wavelength)
    return np.exp(-2j * np.pi / wavelength * (rn - r)) / np.sqrt(N)


def geo_subarray_codeword(theta, r, n_active, N, wavelength):
    """Zero-padded centred sub-array steering vector; r=inf gives a planar beam."""
    w = np.zeros(N, dtype=complex)
    first = (N - n_active) // 2
    if np.isinf(r):
        sub = np.exp(1j * np.pi * np.arange(n_active) * theta) / np.sqrt(n_active)
    else:
        sub = geo_steering(theta, r, n_active, wavelength)
    w[first:first + n_active] = sub
    return w


def polar_grid(N, S, s_delta):
    """All (n, s, theta, r) of the polar grid in column order."""
    out = []
    for n in range(1, N + 1):
        t = (2 * n - N - 1) / N
        for s in range(S):
            out.append((n, s, t, np.inf if s == 0 else s_delta * (1 - t * t) / s))
    return out


def nesting_violations(cfg, S, s_delta, L):
    """Lower-level cells whose children do not tile them in (theta, ring-position) index space.

    A layer-u codeword owns the angle cell theta +- 1/2^u and the distance segment
    ((j-1) S/S_u, j S/S_u] of ring positions; its four children must tile both and
    sample ring positions inside the parent's segment.
    """
    from xlbeam.codebook import distance_index, lower_codeword

    bad = []
    for u in range(L + 1, cfg.n_layers):
        s_u = 2 ** (u - L)
        for i in range(1, 2**u + 1):
            for j in range(1, s_u + 1):
                parent = lower_codeword(u, i, j, cfg, S, s_delta, L)
                kids = [lower_codeword(u + 1, a, b, cfg, S, s_delta, L)
                        for a in (2 * i - 1, 2 * i) for b in (2 * j - 1, 2 * j)]
                half = 1 / 2 ** (u + 1)
                lo = min(k.theta for k in kids) - half
                hi = max(k.theta for k in kids) + half
                a_ok = np.isclose(lo, parent.theta - 2 * half) and np.isclose(hi, parent.theta + 2 * half)
                seg = ((j - 1) * S / s_u, j * S / s_u)
                kid_segs = sorted(((k.distance_index - 1) * S / (2 * s_u), k.distance_index * S / (2 * s_u)) for k in kids)
                d_ok = kid_segs[0][0] == seg[0] and kid_segs[-1][1] == seg[1]
                pos_ok = all(seg[0] < distance_index(u + 1, k.distance_index, S, L) <= seg[1] for k in kids)
                if not (a_ok and d_ok and pos_ok):
                    bad.append((u, i, j))
    return bad
