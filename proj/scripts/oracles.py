#!/usr/bin/env python3
"""Reference values for the unit tests, computed by brute force with numpy/scipy.

Writes tests/data/small.csv and prints the frozen numbers the C++ tests pin.
Run from the repository root: python3 scripts/oracles.py
"""
import itertools
import math

import numpy as np

np.set_printoptions(precision=17)
from scipy import stats

MASK = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


class Xoshiro:
    def __init__(self, seed):
        self.s = []
        st = seed
        for _ in range(4):
            st, v = splitmix64(st)
            self.s.append(v)

    def next(self):
        s = self.s
        rotl = lambda x, k: ((x << k) | (x >> (64 - k))) & MASK
        result = (rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def below(self, bound):
        m = self.next() * bound
        low = m & MASK
        if low < bound:
            threshold = ((1 << 64) - bound) % bound
            while low < threshold:
                m = self.next() * bound
                low = m & MASK
        return m >> 64


def plan(seed, B, n):
    rng = Xoshiro(seed)
    tables = []
    for _ in range(B):
        t = list(range(n))
        for i in range(n - 1, 0, -1):
            j = rng.below(i + 1)
            t[i], t[j] = t[j], t[i]
        tables.append(t)
    return tables


def trap(points):
    p = np.asarray(points)
    w = np.zeros(len(p))
    d = np.diff(p)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def group_stats(effects_list):
    """Covariances from effect rows exactly as given (no re-centering)."""
    covs = [V.T @ V / (V.shape[0] - 1) for V in effects_list]
    ns = [V.shape[0] for V in effects_list]
    n, k = sum(ns), len(ns)
    pooled = sum((ni - 1) * c for ni, c in zip(ns, covs)) / (n - k)
    J = effects_list[0].shape[1]
    ssb = np.zeros((J, J))
    sse = np.zeros((J, J))
    for V, c, ni in zip(effects_list, covs, ns):
        ssb += (ni - 1) * (c - pooled) ** 2
        for row in V:
            sse += (np.outer(row, row) - c) ** 2
    return ssb, sse, pooled, n, k


def quasi_f(ssb, sse, n, k):
    return (ssb / (k - 1)) / (sse / (n - k))


def effects(groups):
    return [G - G.mean(axis=0) for G in groups]


def varpi_emp(groups):
    V = effects(groups)
    _, _, pooled, n, _ = group_stats(V)
    J = pooled.shape[0]
    out = np.zeros((J, J, J, J))
    for s1, t1, s2, t2 in itertools.product(range(J), repeat=4):
        acc = 0.0
        for E in V:
            for v in E:
                acc += v[s1] * v[t1] * v[s2] * v[t2]
        out[s1, t1, s2, t2] = acc / n - pooled[s1, t1] * pooled[s2, t2]
    return out


def varpi_gauss(pooled):
    J = pooled.shape[0]
    out = np.zeros((J, J, J, J))
    for s1, t1, s2, t2 in itertools.product(range(J), repeat=4):
        out[s1, t1, s2, t2] = pooled[s1, s2] * pooled[t1, t2] + pooled[s1, t2] * pooled[s2, t1]
    return out


def ws(varpi, w, k, length):
    J = len(w)
    tr2 = 0.0
    for s1, t1, s2, t2 in itertools.product(range(J), repeat=4):
        g = varpi[s1, t1, s2, t2] / math.sqrt(varpi[s1, t1, s1, t1] * varpi[s2, t2, s2, t2])
        tr2 += w[s1] * w[t1] * w[s2] * w[t2] * g * g
    trg = length ** 2
    beta = tr2 / ((k - 1) * trg)
    d = (k - 1) * trg ** 2 / tr2
    return tr2, beta, d


def fmt(x):
    return repr(float(x))


def main():
    print("chi2_sf(3.841459, 1) =", fmt(stats.chi2.sf(3.841459, 1)))
    print("chi2_sf(5.991464547107979, 2) =", fmt(stats.chi2.sf(5.991464547107979, 2)))
    print("chi2_sf(12.5, 7.3) =", fmt(stats.chi2.sf(12.5, 7.3)))
    print("chi2_sf(950, 1000) =", fmt(stats.chi2.sf(950.0, 1000.0)))
    print("chi2_upper(0.05, 3.7) =", fmt(stats.chi2.isf(0.05, 3.7)))

    x = np.array([1.0, 2.0, 3.0, 4.0, 10.0])
    q25, q75 = np.percentile(x, [25, 75])
    h = 0.9 * min(x.std(ddof=1), (q75 - q25) / 1.34) * len(x) ** -0.2
    print("silverman({1,2,3,4,10}) =", fmt(h), "kde at 2.5 =", fmt(np.mean(stats.norm.pdf((2.5 - x) / h)) / h))
    print("ks =", fmt(stats.ks_2samp([0.1, 0.4, 0.9, 1.3, 2.2], [0.35, 0.5, 1.0, 3.0]).statistic))
    print("ks crit(2000, 2000, 0.01) =", fmt(math.sqrt(-math.log(0.005) / 2) * math.sqrt(4000 / 2000 ** 2)))

    lam = 1.5 * 0.1 ** np.arange(11)
    phi0 = np.array([1.0] + [v for r in range(1, 6) for v in (0.0, math.sqrt(2))])
    print("gamma1(0,0) rho=0.1 =", fmt(np.sum(lam * phi0 ** 2)))

    # Hand table: two small groups on a two-point grid.
    hand1 = np.array([[0.0, 1.0], [2.0, 0.0], [1.0, 5.0]])
    hand2 = np.array([[1.0, 1.0], [4.0, 3.0], [-2.0, 0.0], [0.0, -3.0], [3.0, -1.0]])
    dup = varpi_emp([hand1, hand1.copy()])
    print("duplicated-group varpi diag:", repr(np.diag(dup.reshape(4, 4))))
    vp = varpi_emp([hand1, hand2])
    print("hand varpi (p=(s,t) flattened s*2+t):")
    print(repr(vp.reshape(4, 4)))
    diag = np.diag(vp.reshape(4, 4))
    gw = vp.reshape(4, 4) / np.sqrt(np.outer(diag, diag))
    print("hand gamma_omega:")
    print(repr(gw))
    w = trap([0.0, 1.0])
    tr2, beta, d = ws(vp, w, 2, 1.0)
    print("hand tr_gamma_sq, beta, d =", fmt(tr2), fmt(beta), fmt(d))

    # Fixture dataset for end-to-end oracles.
    rng = np.random.default_rng(20240611)
    sizes = [4, 5, 6]
    points = [0.0, 0.2, 0.45, 0.7, 1.0]
    J = len(points)
    groups = []
    for i, ni in enumerate(sizes):
        base = rng.standard_normal((ni, J)) * (1.0 + 0.5 * i)
        groups.append(np.round(base + np.linspace(0, 1, J) * i, 6))
    with open("tests/data/small.csv", "w") as f:
        f.write("group,subject," + ",".join(repr(p) for p in points) + "\n")
        for i, G in enumerate(groups):
            for j, row in enumerate(G):
                f.write(f"g{i + 1},s{j + 1}," + ",".join(f"{v:.6f}" for v in row) + "\n")
    groups = []
    with open("tests/data/small.csv") as f:
        rows = [line.strip().split(",") for line in f][1:]
    for label in ["g1", "g2", "g3"]:
        groups.append(np.array([[float(x) for x in r[2:]] for r in rows if r[0] == label]))

    w = trap(points)
    V = effects(groups)
    ssb, sse, pooled, n, k = group_stats(V)
    F = quasi_f(ssb, sse, n, k)
    t_n = w @ F @ w
    idx = np.unravel_index(np.argmax(F), F.shape)
    print("small T_n =", fmt(t_n), "F_max =", fmt(F.max()), "argmax =", idx)
    print("small L2 =", fmt(w @ ssb @ w), "Tmax =", fmt(ssb.max()))
    print("small pooled(1,3) =", fmt(pooled[1, 3]))
    for name, vp in [("empirical", varpi_emp(groups)), ("gaussian", varpi_gauss(pooled))]:
        tr2, beta, d = ws(vp, w, k, 1.0)
        p = stats.chi2.sf(t_n / beta, d)
        crit = beta * stats.chi2.isf(0.05, d)
        print(f"small gpf_nv {name}: tr2 =", fmt(tr2), "beta =", fmt(beta), "d =", fmt(d), "p =", fmt(p),
              "crit =", fmt(crit))

    # Permuted statistics for plan(seed=7, B=5) on the pooled effects.
    pool = np.vstack(V)
    tables = plan(7, 5, n)
    print("plan seed 7 first table:", tables[0])
    starts = np.cumsum([0] + sizes)
    for b, t in enumerate(tables):
        perm = pool[t]
        parts = [perm[starts[i]:starts[i + 1]] for i in range(k)]
        s_ssb, s_sse, _, _, _ = group_stats(parts)
        Fs = quasi_f(s_ssb, s_sse, n, k)
        print(f"perm {b}: T*={fmt(w @ Fs @ w)} F*={fmt(Fs.max())} L2*={fmt(w @ s_ssb @ w)} Tmax*={fmt(s_ssb.max())}")


if __name__ == "__main__":
    main()
