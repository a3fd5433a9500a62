"""Brute-force reference implementations used by tests only.

Written straight from the definitions with plain loops; deliberately
independent of the vectorized library code they check.
"""

import math

import numpy as np


def silhouette_oracle(points, labels):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    n = len(points)
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(np.linalg.norm(points[i] - points[j]) for j in own) / len(own)
        b = math.inf
        for c in set(labels.tolist()):
            if c == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(np.linalg.norm(points[i] - points[j]) for j in members) / len(members))
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return sum(scores) / n


def radius_oracle(points, labels):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    radii = []
    for c in sorted(set(labels.tolist())):
        members = points[labels == c]
        centroid = members.sum(axis=0) / len(members)
        radii.append(sum(np.linalg.norm(p - centroid) for p in members) / len(members))
    return sum(radii) / len(radii)


def davies_bouldin_oracle(points, labels):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    centroids = [points[labels == c].sum(axis=0) / (labels == c).sum() for c in classes]
    sigmas = [
        sum(np.linalg.norm(p - centroids[i]) for p in points[labels == c]) / (labels == c).sum()
        for i, c in enumerate(classes)
    ]
    total = 0.0
    for i in range(len(classes)):
        worst = 0.0
        for j in range(len(classes)):
            if i == j:
                continue
            worst = max(
                worst, (sigmas[i] + sigmas[j]) / np.linalg.norm(centroids[i] - centroids[j])
            )
        total += worst
    return total / len(classes)


def random_instance(seed, max_clusters=5, max_dim=8, max_per_cluster=6):
    gen = np.random.default_rng(seed)
    n_clusters = int(gen.integers(2, max_clusters + 1))
    dim = int(gen.integers(1, max_dim + 1))
    points, labels = [], []
    for c in range(n_clusters):
        count = int(gen.integers(1, max_per_cluster + 1))
        center = gen.normal(0, 5, dim)
        for _ in range(count):
            points.append(center + gen.normal(0, 1, dim))
            labels.append(c)
    return np.array(points), np.array(labels)
