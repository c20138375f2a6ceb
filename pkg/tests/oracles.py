"""Independent reference implementations used to cross-check the fast paths.

Everything here is written the slow, obvious way - dense matrices, explicit
loops, no code shared with the library internals - so agreement between the
two routes actually means something.
"""
import numpy as np


def hat_design(knots, x):
    """Hat-function design built column by column with np.interp."""
    knots = np.asarray(knots, dtype=np.float64)
    x = np.clip(np.asarray(x, dtype=np.float64), knots[0], knots[-1])
    cols = []
    for k in range(knots.size):
        unit = np.zeros(knots.size)
        unit[k] = 1.0
        cols.append(np.interp(x, knots, unit))
    return np.column_stack(cols)


def ridge_penalty(design, intercept_first):
    pen = np.var(design, axis=0)
    pen[pen <= 0] = 1.0
    if intercept_first:
        pen[0] = 0.0
    return pen


def dense_solve(design, z, h, ridge_diag):
    """One weighted ridge solve on explicit matrices."""
    a = design.T @ (design * h[:, None])
    c = design.T @ (h * z)
    beta = np.linalg.solve(a + np.diag(ridge_diag), c)
    resid = z - design @ beta
    return beta, float(np.sum(h * resid * resid))


def dense_tree_fit(x_model, x_split, z, h, *, design="linear", knots=None,
                   ridge=1.0, max_depth=2, min_leaf=20):
    """Greedy dense model-tree fit scanning midpoints between distinct values.

    Returns a nested dict tree: leaves carry ``coef``, internal nodes carry
    ``threshold``/``left``/``right``; every node carries ``sse`` and ``n``.
    """
    x_model = np.asarray(x_model, dtype=np.float64)
    x_split = np.asarray(x_split, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if design == "linear":
        full = np.column_stack([np.ones_like(x_model), x_model])
        pen = ridge * ridge_penalty(full, intercept_first=True)
    else:
        full = hat_design(knots, x_model)
        pen = ridge * ridge_penalty(full, intercept_first=False)
    u = np.unique(x_split)
    thresholds = (u[:-1] + u[1:]) / 2.0

    def build(idx, depth):
        beta, sse = dense_solve(full[idx], z[idx], h[idx], pen)
        node = {"coef": beta, "sse": sse, "n": idx.size}
        if depth >= max_depth:
            return node
        best = None
        for t in thresholds:
            left = idx[x_split[idx] < t]
            right = idx[x_split[idx] >= t]
            if left.size < min_leaf or right.size < min_leaf:
                continue
            _, sse_l = dense_solve(full[left], z[left], h[left], pen)
            _, sse_r = dense_solve(full[right], z[right], h[right], pen)
            if best is None or sse_l + sse_r < best[0]:
                best = (sse_l + sse_r, t)
        if best is None or not best[0] < sse:
            return node
        t = best[1]
        left = build(idx[x_split[idx] < t], depth + 1)
        right = build(idx[x_split[idx] >= t], depth + 1)
        return {"threshold": t, "left": left, "right": right,
                "sse": left["sse"] + right["sse"], "n": idx.size}

    design_kind = design
    tree = build(np.arange(x_split.size), 0)
    tree["_design"] = design_kind
    tree["_knots"] = None if knots is None else np.asarray(knots, dtype=np.float64)
    return tree


def dense_tree_predict(tree, x_model, x_split):
    x_model = np.asarray(x_model, dtype=np.float64)
    x_split = np.asarray(x_split, dtype=np.float64)
    if tree["_design"] == "linear":
        full = np.column_stack([np.ones_like(x_model), x_model])
    else:
        full = hat_design(tree["_knots"], x_model)
    out = np.empty(x_split.size)

    def route(node, idx):
        if "threshold" not in node:
            out[idx] = full[idx] @ node["coef"]
            return
        mask = x_split[idx] < node["threshold"]
        route(node["left"], idx[mask])
        route(node["right"], idx[~mask])

    route(tree, np.arange(x_split.size))
    return out


def naive_quadrant_sse(x_j, x_k, z, h, cuts_j, cuts_k):
    """Four nested loops over cut pairs and quadrants. O(n * cuts^2)."""
    total = float(np.sum(h * z * z))
    best_gain = -np.inf
    best_cut = None
    for cj in cuts_j:
        for ck in cuts_k:
            gain = 0.0
            for side_j in (x_j < cj, x_j >= cj):
                for side_k in (x_k < ck, x_k >= ck):
                    m = side_j & side_k
                    w = float(np.sum(h[m]))
                    if w > 0:
                        wz = float(np.sum(h[m] * z[m]))
                        gain += wz * wz / w
            if gain > best_gain:
                best_gain = gain
                best_cut = (float(cj), float(ck))
    return max(total - best_gain, 0.0), best_cut


def central_difference(f, x, eps):
    return (f(x + eps) - f(x - eps)) / (2.0 * eps)


def second_difference(f, x, eps):
    return (f(x + eps) - 2.0 * f(x) + f(x - eps)) / (eps * eps)
