"""Independent reference computations used by the tests.

Nothing here touches the CSR indices or the tape; each oracle works from the
raw edge list or from plain python loops.
"""

import itertools

import numpy as np

from paga.graph import Edge, build_graph


def dfs_paths(edge_list, u, lam):
    """All simple paths from u (as edge-id tuples) of 1..lam edges, by recursion
    over the raw ``(source, target)`` list."""
    found = []

    def go(vertex, visited, trail):
        if len(trail) == lam:
            return
        for eid, (s, t) in enumerate(edge_list):
            if s == vertex and t not in visited:
                found.append(tuple(trail + [eid]))
                go(t, visited | {t}, trail + [eid])

    go(u, {u}, [])
    return found


def brute_paths(edge_list, u, lam):
    """Same set via itertools.product over edge ids (exponential, tiny graphs only)."""
    found = set()
    m = len(edge_list)
    for length in range(1, lam + 1):
        for combo in itertools.product(range(m), repeat=length):
            verts = [u]
            ok = True
            for eid in combo:
                s, t = edge_list[eid]
                if s != verts[-1] or t in verts:
                    ok = False
                    break
                verts.append(t)
            if ok:
                found.add(combo)
    return found


def random_multigraph(rng, max_vertices=10, max_edges=25, num_types=3, raw_width=0):
    n = int(rng.integers(1, max_vertices + 1))
    m = int(rng.integers(0, max_edges + 1)) if n > 1 else 0
    edges = []
    for _ in range(m):
        s, t = rng.choice(n, size=2, replace=False)
        edges.append(Edge(int(s), int(t), int(rng.integers(num_types)),
                          tuple(rng.standard_normal(raw_width))))
    return build_graph(n, rng.standard_normal((n, 2)), edges)


def loop_matmul(a, b):
    a, b = np.asarray(a), np.asarray(b)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def loop_mse(pred, target):
    p = np.asarray(pred).reshape(-1)
    t = np.asarray(target).reshape(-1)
    total = 0.0
    for a, b in zip(p, t):
        total += (a - b) ** 2
    return total / len(p)


def scalar_adam(theta, grads_seq, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam for a single scalar parameter."""
    m = v = 0.0
    for t, g in enumerate(grads_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        theta = theta - lr * mhat / (vhat ** 0.5 + eps)
    return theta


def power_iteration_radius(m, iters=500, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        lam = norm / np.linalg.norm(v)
        v = w / norm
    return lam
