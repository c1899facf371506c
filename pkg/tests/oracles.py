"""Independent reference implementations used as test oracles.

These deliberately avoid the library's solver paths: FISTA instead of
coordinate descent, normal equations instead of orthogonal factorization,
plain loops instead of vectorized folds.
"""

import math

import numpy as np


def lasso_objective(X, y, lam, theta):
    n = X.shape[0]
    r = y - X @ theta
    return float(r @ r / (2 * n) + lam * np.abs(theta).sum())


def fista_lasso(X, y, lam, iters=20000, tol=1e-14):
    """Accelerated proximal gradient on the lasso objective."""
    n, d = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    L = float(np.linalg.eigvalsh(G)[-1])
    if L <= 0:
        return np.zeros(d)
    step = 1.0 / L
    w = np.zeros(d)
    z = w.copy()
    t = 1.0
    prev_obj = np.inf
    for k in range(iters):
        grad = G @ z - c
        w_new = z - step * grad
        w_new = np.sign(w_new) * np.maximum(np.abs(w_new) - lam * step, 0.0)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        if k % 50 == 49:
            obj = lasso_objective(X, y, lam, w)
            if abs(prev_obj - obj) <= tol * max(1.0, abs(obj)):
                break
            prev_obj = obj
    return w


def normal_equations_ols(X_S, y):
    A = X_S.T @ X_S
    return np.linalg.solve(A, X_S.T @ y)


def naive_covariance(X):
    n, d = X.shape
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(n):
                s += X[k, i] * X[k, j]
            out[i, j] = s / n
    return out


def naive_debias(X, y, theta_tilde, omega):
    n, d = X.shape
    resid = [y[i] - sum(X[i, j] * theta_tilde[j] for j in range(d)) for i in range(n)]
    corr = [sum(X[i, j] * resid[i] for i in range(n)) / n for j in range(d)]
    return np.array(
        [theta_tilde[k] + sum(omega[k, j] * corr[j] for j in range(d)) for k in range(d)]
    )


def naive_tally(payloads, d):
    """payloads: list of lists of (index, sign) or bare indices."""
    votes = [0] * d
    signs = [0] * d
    for payload in payloads:
        for item in payload:
            if isinstance(item, tuple):
                idx, sgn = item
                votes[idx] += 1
                signs[idx] += sgn
            else:
                votes[item] += 1
    return np.array(votes), np.array(signs)


def gaussian_upper_tail(t):
    """Phi^c(t) through the complementary error function."""
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def exact_binomial_upper_tail(M, p, threshold):
    """Pr(Bin(M, p) > threshold) by direct summation."""
    total = 0.0
    for k in range(M + 1):
        if k > threshold:
            total += math.comb(M, k) * p**k * (1 - p) ** (M - k)
    return total
