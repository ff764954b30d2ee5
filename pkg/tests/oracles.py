"""Independent reference implementations used to verify the fast paths."""

import numpy as np


def exact_regression_tree_values(X, g, h, max_depth, reg):
    """Exact-split Newton regression tree; returns per-sample leaf values.

    Scans every raw-value boundary per feature (no histograms) with the same
    gain formula and tie-breaking order as the production grower.
    """
    out = np.empty(len(X))

    def build(idx, depth):
        G, H = g[idx].sum(), h[idx].sum()
        value = -G / (H + reg)
        if depth >= max_depth or len(idx) < 2:
            out[idx] = value
            return
        best = None  # (gain, feature, threshold)
        parent = G**2 / (H + reg)
        for f in range(X.shape[1]):
            order = np.argsort(X[idx, f], kind="stable")
            sv = X[idx[order], f]
            gl = g[idx[order]].cumsum()
            hl = h[idx[order]].cumsum()
            for pos in range(1, len(idx)):
                if sv[pos] <= sv[pos - 1]:
                    continue
                GL, HL = gl[pos - 1], hl[pos - 1]
                GR, HR = G - GL, H - HL
                gain = GL**2 / (HL + reg) + GR**2 / (HR + reg) - parent
                if best is None or gain > best[0]:
                    best = (gain, f, (sv[pos - 1] + sv[pos]) / 2.0)
        if best is None or best[0] <= 1e-12:
            out[idx] = value
            return
        _, f, thr = best
        go_left = X[idx, f] <= thr
        build(idx[go_left], depth + 1)
        build(idx[~go_left], depth + 1)

    build(np.arange(len(X)), 0)
    return out
