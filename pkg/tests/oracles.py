"""Independent brute-force reference computations used by the tests.

Nothing here imports the code paths under test beyond plain data containers.
"""
import itertools

import numpy as np


def random_connected_weights(rng, n, p=0.5, low=0.1, high=1.0):
    """Dense symmetric weights with a random spanning path so the graph is connected."""
    W = np.where(rng.random((n, n)) < p, rng.uniform(low, high, (n, n)), 0.0)
    W = np.triu(W, 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        i, j = min(a, b), max(a, b)
        if W[i, j] == 0:
            W[i, j] = rng.uniform(low, high)
    return W + W.T


def hitting_times_to(W, target):
    """Expected steps to reach ``target`` from every node (first-step equations)."""
    n = W.shape[0]
    P = W / W.sum(axis=1, keepdims=True)
    others = [i for i in range(n) if i != target]
    A = np.eye(n - 1) - P[np.ix_(others, others)]
    h = np.zeros(n)
    h[others] = np.linalg.solve(A, np.ones(n - 1))
    return h


def commute_brute(W, i, j):
    if i == j:
        return 0.0
    return hitting_times_to(W, j)[i] + hitting_times_to(W, i)[j]


def absorption_probabilities(W, labeled, labels, num_classes):
    """Absorbing-chain class probabilities via the fundamental matrix."""
    n = W.shape[0]
    P = W / W.sum(axis=1, keepdims=True)
    unl = [i for i in range(n) if i not in set(labeled)]
    N = np.linalg.inv(np.eye(len(unl)) - P[np.ix_(unl, unl)])
    B = N @ P[np.ix_(unl, list(labeled))]
    out = np.zeros((len(unl), num_classes))
    for col, c in enumerate(labels):
        out[:, c] += B[:, col]
    return unl, out


def neumann_partial_sum(A, alpha, K):
    n = A.shape[0]
    total = np.eye(n)
    term = np.eye(n)
    for _ in range(K):
        term = alpha * (term @ A)
        total = total + term
    return total


def lgc_dense(W, Y, alpha):
    """Dense LGC ``(1 - a)(I - a S)^{-1} Y`` from an explicit weight matrix."""
    d = W.sum(axis=1)
    S = W / np.sqrt(np.outer(d, d))
    return (1 - alpha) * np.linalg.solve(np.eye(W.shape[0]) - alpha * S, Y)


def project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (css - 1))[0][-1]
    theta = (css[rho] - 1) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def simplex_ls_projected_gradient(x, Xk, tol=1e-13, max_iter=200000):
    """Accelerated projected gradient for min |x - Xk^T z|^2 on the simplex."""
    Q = Xk @ Xk.T
    q = Xk @ x
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    z = np.full(Xk.shape[0], 1.0 / Xk.shape[0])
    yk, t = z.copy(), 1.0
    for _ in range(max_iter):
        z_new = project_simplex(yk - (Q @ yk - q) / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        yk = z_new + (t - 1) / t_new * (z_new - z)
        if np.abs(z_new - z).max() < tol:
            z = z_new
            break
        z, t = z_new, t_new
    return z


def exhaustive_best_subset(score, candidates, s):
    best, best_val = None, -np.inf
    for S in itertools.combinations(sorted(candidates), s):
        v = score(list(S))
        if v > best_val + 1e-12:
            best, best_val = list(S), v
    return best, best_val
