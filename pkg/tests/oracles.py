"""
Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (loops, Fractions,
enumeration) and shares no code with the package.
"""
import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

STAGES = range(5)
_ZERO = Fraction(0)


# ---------------------------------------------------------------- consensus

def zhat(labels, s, t):
    """Vote counts of the other scorers at epoch t divided by the largest count."""
    votes = [0] * 5
    for i in range(len(labels)):
        if i != s and labels[i][t] is not None:
            votes[labels[i][t]] += 1
    top = max(votes)
    if top == 0:
        return None
    return [Fraction(c, top) if c else _ZERO for c in votes]


def soft_agreement(labels, s):
    credits = []
    for t in range(len(labels[s])):
        if labels[s][t] is None:
            continue
        z = zhat(labels, s, t)
        if z is None:
            continue
        credits.append(z[labels[s][t]])
    return sum(credits, Fraction(0)) / len(credits)


def soft_consensus(labels, t):
    votes = [row[t] for row in labels if row[t] is not None]
    if not votes:
        return None
    return [Fraction(votes.count(k), len(votes)) for k in STAGES]


def consensus_labels(labels, participants=None, rel=None):
    """Majority vote; ties go to the most reliable participant (index order on equal reliability)."""
    n = len(labels)
    participants = list(range(n)) if participants is None else list(participants)
    if rel is None:
        rel = [soft_agreement(labels, s) for s in range(n)]
    ranked = sorted(participants, key=lambda i: (-rel[i], i))
    out = []
    for t in range(len(labels[0])):
        votes = Counter(labels[i][t] for i in participants if labels[i][t] is not None)
        if not votes:
            out.append(None)
            continue
        top = max(votes.values())
        tied = {k for k, c in votes.items() if c == top}
        if len(tied) == 1:
            out.append(tied.pop())
            continue
        for i in ranked:
            if labels[i][t] in tied:
                out.append(labels[i][t])
                break
    return out


# ------------------------------------------------------------------ metrics

def naive_scores(ref, pred):
    """Accuracy, per-class F1 (None if absent), exclude-mode macro-F1 and kappa by recounting."""
    pairs = [(r, p) for r, p in zip(ref, pred) if r >= 0 and p >= 0]
    n = len(pairs)
    correct = 0
    for r, p in pairs:
        if r == p:
            correct += 1
    acc = correct / n
    f1 = {}
    for k in STAGES:
        tp = fp = fn = 0
        for r, p in pairs:
            if r == k and p == k:
                tp += 1
            elif r != k and p == k:
                fp += 1
            elif r == k and p != k:
                fn += 1
        f1[k] = None if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
    present = [v for v in f1.values() if v is not None]
    mf1 = sum(present) / len(present)
    pe = 0.0
    for k in STAGES:
        pe += sum(1 for r, _ in pairs if r == k) * sum(1 for _, p in pairs if p == k) / n ** 2
    kappa = None if pe == 1 else (acc - pe) / (1 - pe)
    return acc, f1, mf1, kappa


def naive_acs(a, b, epochs):
    total = 0.0
    for t in epochs:
        dot = sum(a[t][k] * b[t][k] for k in STAGES)
        na = math.sqrt(sum(x * x for x in a[t]))
        nb = math.sqrt(sum(x * x for x in b[t]))
        total += dot / (na * nb)
    return total / len(epochs)


# --------------------------------------------------------------------- auc

def pair_count_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


# ---------------------------------------------------------------- wilcoxon

def midranks(values):
    out = []
    for v in values:
        below = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        out.append(Fraction(2 * below + equal + 1, 2))
    return out


def exact_wilcoxon_greater(a, b):
    """P(W+ >= observed) by enumerating every sign pattern of the non-zero differences."""
    d = [x - y for x, y in zip(a, b) if x != y]
    r = midranks([abs(x) for x in d])
    observed = sum((ri for ri, di in zip(r, d) if di > 0), Fraction(0))
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        if sum((ri for ri, s in zip(r, signs) if s), Fraction(0)) >= observed:
            hits += 1
    return hits / 2 ** len(d)


# ---------------------------------------------------------------- logistic

def logistic_oracle(X, y, lam):
    """Minimum of mean NLL + lam/2 |w|^2 on standardised X, found by BFGS."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sd = X.std(axis=0)
    Z = (X[:, sd > 0] - X.mean(axis=0)[sd > 0]) / sd[sd > 0]

    def f(theta):
        z = Z @ theta[:-1] + theta[-1]
        return np.mean(np.logaddexp(0, z) - y * z) + lam / 2 * theta[:-1] @ theta[:-1]

    def g(theta):
        z = Z @ theta[:-1] + theta[-1]
        p = 1 / (1 + np.exp(-z))
        gw = Z.T @ (p - y) / len(y) + lam * theta[:-1]
        return np.append(gw, np.mean(p - y))

    res = minimize(f, np.zeros(Z.shape[1] + 1), jac=g, method="BFGS", options={"gtol": 1e-11, "maxiter": 10000})
    return float(res.fun)


# --------------------------------------------------------------------- pca

def eig_sym3(A):
    """Eigenvalues (descending) of a symmetric 3x3 matrix by the trigonometric formula,
    plus the unit eigenvector of the largest one."""
    A = np.asarray(A, dtype=float)
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = np.trace(A) / 3
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6)
    B = (A - q * np.eye(3)) / p
    r = np.linalg.det(B) / 2
    phi = math.acos(min(1.0, max(-1.0, r))) / 3
    l1 = q + 2 * p * math.cos(phi)
    l3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    l2 = 3 * q - l1 - l3
    M = A - l1 * np.eye(3)
    # the eigenvector is orthogonal to the rows of A - l1 I; take the best-conditioned cross product
    cands = [np.cross(M[0], M[1]), np.cross(M[0], M[2]), np.cross(M[1], M[2])]
    v = max(cands, key=lambda c: np.linalg.norm(c))
    return (l1, l2, l3), v / np.linalg.norm(v)
