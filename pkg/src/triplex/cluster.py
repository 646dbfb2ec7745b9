"""KMeans, diagonal-covariance GMM, and HDBSCAN, plus model-selection sweeps."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import MetricError, ari, nmi, pairwise_distances, silhouette

log = logging.getLogger(__name__)


class ClusterError(Exception):
    pass


# ---------------------------------------------------------------------------
# KMeans


@dataclass
class PartitionResult:
    algorithm: str
    k: int
    labels: np.ndarray
    seed: int
    inertia: float | None = None
    log_likelihood: float | None = None
    objective_history: list[float] = field(default_factory=list)
    responsibilities: np.ndarray | None = None
    n_iter: int = 0


def _sq_dists(X, centers):
    xx = (X * X).sum(axis=1)[:, None]
    cc = (centers * centers).sum(axis=1)[None, :]
    d2 = xx + cc - 2.0 * (X @ centers.T)
    np.clip(d2, 0.0, None, out=d2)
    return d2


def _kmeanspp_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dists(X, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        d2 = np.minimum(d2, _sq_dists(X, centers[j : j + 1]).ravel())
    return centers


def _lloyd(X, centers, max_iter, tol):
    history = []
    labels = None
    for it in range(max_iter):
        d2 = _sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), labels].sum()))
        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=centers.shape[0])
        for j in range(centers.shape[0]):
            if counts[j] > 0:
                new_centers[j] = X[labels == j].mean(axis=0)
        # empty-cluster repair: farthest point of the largest cluster seeds it
        for j in np.flatnonzero(counts == 0):
            big = int(counts.argmax())
            members = np.flatnonzero(labels == big)
            far = members[_sq_dists(X[members], new_centers[big : big + 1]).ravel().argmax()]
            new_centers[j] = X[far]
            labels[far] = j
            counts = np.bincount(labels, minlength=centers.shape[0])
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _sq_dists(X, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    if not history or inertia < history[-1]:
        history.append(inertia)
    return centers, labels, inertia, history


def kmeans_fit(X, k, seed, max_iter=300, tol=1e-6, n_init=10):
    """k-means++ seeded Lloyd iterations, best of `n_init` restarts."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1:
        raise ClusterError("k must be >= 1")
    if k > n:
        raise ClusterError(f"k={k} exceeds sample count {n}")
    children = np.random.SeedSequence(seed).spawn(n_init)
    best = None
    for ss in children:
        rng = np.random.Generator(np.random.PCG64(ss))
        centers = _kmeanspp_init(X, k, rng)
        centers, labels, inertia, history = _lloyd(X, centers, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia, history)
    centers, labels, inertia, history = best
    labels = _compact_labels(labels)
    return PartitionResult(
        algorithm="kmeans",
        k=int(labels.max()) + 1,
        labels=labels,
        seed=seed,
        inertia=inertia,
        objective_history=history,
        n_iter=len(history),
    ), centers


def _compact_labels(labels):
    uniq, inv = np.unique(labels, return_inverse=True)
    return inv.astype(np.int64)


# ---------------------------------------------------------------------------
# Diagonal-covariance GMM


def _log_gauss_diag(X, means, variances):
    # n x k log densities for diagonal Gaussians
    n, d = X.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        diff = X - means[j]
        out[:, j] = -0.5 * (d * np.log(2 * np.pi) + np.log(variances[j]).sum() + (diff * diff / variances[j]).sum(axis=1))
    return out


def _logsumexp(a, axis=None, keepdims=False):
    amax = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.exp(a - amax).sum(axis=axis, keepdims=True)) + amax
    return out if keepdims else np.squeeze(out, axis=axis)


def gmm_fit(X, k, seed, max_iter=200, tol=1e-6, reg=1e-6, n_init=10):
    """EM for a diagonal-covariance mixture, initialized from kmeans."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if k < 1:
        raise ClusterError("k must be >= 1")
    if k > n:
        raise ClusterError(f"k={k} exceeds sample count {n}")
    best = None
    for restart in range(n_init):
        km, centers = kmeans_fit(X, k, seed=seed + restart, n_init=1)
        k_eff = centers.shape[0]
        weights = np.bincount(km.labels, minlength=k_eff).astype(np.float64)
        weights /= weights.sum()
        means = centers.copy()
        variances = np.empty((k_eff, d))
        for j in range(k_eff):
            members = X[km.labels == j]
            variances[j] = members.var(axis=0) + reg if len(members) else X.var(axis=0) + reg
        variances = np.maximum(variances, reg)
        ll_history = []
        resp = None
        for _ in range(max_iter):
            log_p = _log_gauss_diag(X, means, variances) + np.log(weights)[None, :]
            log_norm = _logsumexp(log_p, axis=1, keepdims=True)
            ll = float(log_norm.sum()) / n
            resp = np.exp(log_p - log_norm)
            ll_history.append(ll)
            nk = resp.sum(axis=0)
            safe_nk = np.maximum(nk, 1e-16)
            weights = nk / nk.sum()
            means = (resp.T @ X) / safe_nk[:, None]
            for j in range(means.shape[0]):
                diff = X - means[j]
                variances[j] = (resp[:, j][:, None] * diff * diff).sum(axis=0) / safe_nk[j] + reg
            variances = np.maximum(variances, reg)
            collapsed = np.flatnonzero(nk / n < 1e-12)
            if collapsed.size:
                worst = int(np.argmin(log_norm.ravel()))
                for j in collapsed:
                    log.warning("gmm component %d collapsed; reseeding to point %d", j, worst)
                    means[j] = X[worst]
                    variances[j] = X.var(axis=0) + reg
                    weights[j] = 1.0 / n
                weights = weights / weights.sum()
            if len(ll_history) > 1 and abs(ll_history[-1] - ll_history[-2]) < tol:
                break
        if best is None or ll_history[-1] > best[0]:
            best = (ll_history[-1], resp, ll_history)
    ll, resp, ll_history = best
    labels = _compact_labels(resp.argmax(axis=1))
    return PartitionResult(
        algorithm="gmm",
        k=int(labels.max()) + 1,
        labels=labels,
        seed=seed,
        log_likelihood=ll,
        objective_history=ll_history,
        responsibilities=resp,
        n_iter=len(ll_history),
    )


# ---------------------------------------------------------------------------
# HDBSCAN: core distances -> mutual reachability -> MST -> single linkage
# -> condensed tree -> excess-of-mass extraction


@dataclass
class DensityResult:
    labels: np.ndarray
    n_clusters: int
    noise_fraction: float
    min_cluster_size: int
    min_samples: int


def _mst_mutual_reachability(D, core):
    """Prim's algorithm over the implicit mutual-reachability graph."""
    n = D.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    mr0 = np.maximum(np.maximum(core[0], core), D[0])
    best = mr0.copy()
    best[0] = np.inf
    edges = []
    for _ in range(n - 1):
        v = int(np.argmin(best))
        edges.append((best_from[v], v, float(best[v])))
        in_tree[v] = True
        mrv = np.maximum(np.maximum(core[v], core), D[v])
        update = (~in_tree) & (mrv < best)
        best_from[update] = v
        best[update] = mrv[update]
        best[v] = np.inf
    edges.sort(key=lambda e: e[2])
    return edges


def _single_linkage(edges, n):
    """Union-find over sorted MST edges; returns (children, dists, sizes)."""
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)
    children = np.zeros((n - 1, 2), dtype=np.int64)
    dists = np.zeros(n - 1)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    nxt = n
    for i, (a, b, w) in enumerate(edges):
        ra, rb = find(a), find(b)
        children[i] = (ra, rb)
        dists[i] = w
        parent[ra] = parent[rb] = nxt
        size[nxt] = size[ra] + size[rb]
        nxt += 1
    return children, dists, size


def _condense_tree(children, dists, sizes, n, min_cluster_size):
    """Condensed tree entries (parent, child, lambda, size); cluster ids >= n."""
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    entries = []
    ignore = set()

    def leaves(node):
        stack, out = [node], []
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend(children[x - n])
        return out

    # process internal nodes top-down (higher id = later merge = larger dist)
    for node in range(root, n - 1, -1):
        if node in ignore:
            continue
        left, right = children[node - n]
        dist = dists[node - n]
        lam = 1.0 / dist if dist > 0 else np.inf
        lsz = sizes[left] if left >= n else 1
        rsz = sizes[right] if right >= n else 1
        parent_label = relabel[node]
        falling = []
        if lsz >= min_cluster_size and rsz >= min_cluster_size:
            for child, csz in ((left, lsz), (right, rsz)):
                relabel[child] = next_label
                entries.append((parent_label, next_label, lam, int(csz)))
                next_label += 1
        elif lsz < min_cluster_size and rsz < min_cluster_size:
            falling = [left, right]
        elif lsz < min_cluster_size:
            falling = [left]
            relabel[right] = parent_label
        else:
            falling = [right]
            relabel[left] = parent_label
        for sub in falling:
            for p in leaves(sub):
                entries.append((parent_label, p, lam, 1))
            if sub >= n:
                ignore.update(x for x in _descendant_internal(children, sub, n))
                ignore.add(sub)
    return entries


def _descendant_internal(children, node, n):
    stack, out = [node], []
    while stack:
        x = stack.pop()
        if x >= n:
            out.append(x)
            stack.extend(children[x - n])
    return out


def _stability(entries, n):
    births = {n: 0.0}
    for parent, child, lam, _size in entries:
        if child >= n:
            births[child] = lam
    stab = {c: 0.0 for c in births}
    lam_cap = max((lam for _, _, lam, _ in entries if np.isfinite(lam)), default=1.0)
    for parent, _child, lam, size in entries:
        lam_f = lam if np.isfinite(lam) else lam_cap * 2.0
        birth = births[parent]
        birth_f = birth if np.isfinite(birth) else lam_cap * 2.0
        stab[parent] += (lam_f - birth_f) * size
    return stab


def _extract_eom(entries, n):
    """Excess-of-mass cluster selection; the root cluster is never selected."""
    stab = _stability(entries, n)
    cluster_children: dict[int, list[int]] = {c: [] for c in stab}
    for parent, child, _lam, _size in entries:
        if child >= n:
            cluster_children[parent].append(child)
    selected = {c: True for c in stab if c != n}
    for node in sorted(stab, reverse=True):
        if node == n:
            continue
        subtree = sum(stab[c] for c in cluster_children[node])
        if cluster_children[node] and subtree > stab[node]:
            selected[node] = False
            stab[node] = subtree
        elif selected[node]:
            # deselect all descendant clusters
            stack = list(cluster_children[node])
            while stack:
                c = stack.pop()
                selected[c] = False
                stack.extend(cluster_children[c])
    return {c for c, sel in selected.items() if sel}, cluster_children


def hdbscan_fit(X, min_cluster_size, min_samples=None) -> DensityResult:
    """Density-based clustering with excess-of-mass flat extraction.

    Noise points are labeled -1. Core distance is the distance to the
    min_samples-th nearest neighbor, the point itself included.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if min_cluster_size < 2:
        raise ClusterError("min_cluster_size must be >= 2")
    if n < min_cluster_size:
        raise ClusterError(f"n={n} is smaller than min_cluster_size={min_cluster_size}")
    if min_samples is None:
        min_samples = min_cluster_size
    D = pairwise_distances(X)
    if D.max() == 0.0:
        return DensityResult(np.zeros(n, dtype=np.int64), 1, 0.0, min_cluster_size, min_samples)
    core = np.sort(D, axis=1)[:, min(min_samples, n) - 1]
    edges = _mst_mutual_reachability(D, core)
    children, dists, sizes = _single_linkage(edges, n)
    entries = _condense_tree(children, dists, sizes, n, min_cluster_size)
    selected, _ = _extract_eom(entries, n)
    cluster_parent = {}
    point_parent = {}
    for parent, child, _lam, _size in entries:
        if child >= n:
            cluster_parent[child] = parent
        else:
            point_parent[child] = parent
    label_of = {c: i for i, c in enumerate(sorted(selected))}
    labels = np.full(n, -1, dtype=np.int64)
    for p in range(n):
        c = point_parent.get(p)
        while c is not None:
            if c in label_of:
                labels[p] = label_of[c]
                break
            c = cluster_parent.get(c)
    n_clusters = len(label_of)
    noise_fraction = float((labels == -1).sum()) / n
    return DensityResult(labels, n_clusters, noise_fraction, min_cluster_size, min_samples)


# ---------------------------------------------------------------------------
# Sweeps and composition


def partition_score(ari_val: float, nmi_val: float) -> float:
    return 0.5 * ari_val + 0.5 * nmi_val


def density_composite(nmi_val: float, ari_val: float, noise_fraction: float) -> float:
    return nmi_val + 0.5 * ari_val - 0.5 * noise_fraction


@dataclass
class SweepRow:
    algorithm: str
    param: int  # k or min_cluster_size
    ari: float | None
    nmi: float | None
    silhouette: float | None
    noise_fraction: float
    score: float | None
    seed: int
    failed: bool = False
    error: str = ""


@dataclass
class SweepOutcome:
    best_config: tuple
    best_score: float
    best_labels: np.ndarray
    table: list[SweepRow]


def labels_with_noise_cluster(labels: np.ndarray) -> np.ndarray:
    """Noise (-1) points become one extra pseudo-cluster for external metrics."""
    labels = np.asarray(labels)
    if (labels == -1).any():
        out = labels.copy()
        out[out == -1] = labels.max() + 1
        return out
    return labels


def _safe_silhouette(X, labels):
    try:
        return silhouette(X, labels)
    except MetricError:
        return None


def partition_sweep(X, true_labels, algorithm, k_range=range(3, 13), seed=42) -> SweepOutcome:
    """Grid search over k; selection score = 0.5*ARI + 0.5*NMI, smallest-k ties."""
    X = np.asarray(X, dtype=np.float64)
    true_labels = np.asarray(true_labels)
    fit = {"kmeans": lambda k, s: kmeans_fit(X, k, s)[0], "gmm": lambda k, s: gmm_fit(X, k, s)}[algorithm]
    table: list[SweepRow] = []
    best = None
    for idx, k in enumerate(k_range):
        cfg_seed = seed ^ idx
        try:
            result = fit(k, cfg_seed)
        except ClusterError as e:
            table.append(SweepRow(algorithm, k, None, None, None, 0.0, None, cfg_seed, failed=True, error=str(e)))
            continue
        a = ari(true_labels, result.labels)
        m = nmi(true_labels, result.labels)
        sil = _safe_silhouette(X, result.labels)
        sc = partition_score(a, m)
        table.append(SweepRow(algorithm, k, a, m, sil, 0.0, sc, cfg_seed))
        if best is None or sc > best[0]:
            best = (sc, (algorithm, k, cfg_seed), result.labels)
    if best is None:
        raise ClusterError(f"all {algorithm} sweep configurations failed")
    return SweepOutcome(best_config=best[1], best_score=best[0], best_labels=best[2], table=table)


def density_sweep(X, true_labels, sizes=(5, 10, 15, 25, 50, 100)) -> SweepOutcome:
    """min_cluster_size sweep; composite = NMI + 0.5*ARI - 0.5*noise_fraction."""
    if not sizes:
        raise ClusterError("density sweep needs at least one min_cluster_size")
    X = np.asarray(X, dtype=np.float64)
    true_labels = np.asarray(true_labels)
    table: list[SweepRow] = []
    best = None
    for size in sizes:
        try:
            result = hdbscan_fit(X, size)
        except ClusterError as e:
            table.append(SweepRow("hdbscan", size, None, None, None, 1.0, None, 0, failed=True, error=str(e)))
            continue
        pred = labels_with_noise_cluster(result.labels)
        a = ari(true_labels, pred)
        m = nmi(true_labels, pred)
        sil = _safe_silhouette(X, pred)
        comp = density_composite(m, a, result.noise_fraction)
        table.append(SweepRow("hdbscan", size, a, m, sil, result.noise_fraction, comp, 0))
        if best is None or comp > best[0]:
            best = (comp, ("hdbscan", size, 0), result.labels)
    if best is None:
        raise ClusterError("all hdbscan sweep configurations failed")
    return SweepOutcome(best_config=best[1], best_score=best[0], best_labels=best[2], table=table)


@dataclass
class ClusterComposition:
    cluster: int
    total: int
    counts: dict
    dominant: object
    purity: float


def cluster_composition(labels, true_labels) -> tuple[list[ClusterComposition], float]:
    """Per-cluster label histograms, dominant-label purity, and overall purity."""
    labels = np.asarray(labels)
    true_labels = np.asarray(true_labels)
    if labels.size == 0:
        return [], 0.0
    rows = []
    weighted = 0.0
    for c in np.unique(labels):
        mask = labels == c
        vals, cnts = np.unique(true_labels[mask], return_counts=True)
        counts = {v.item() if hasattr(v, "item") else v: int(x) for v, x in zip(vals, cnts)}
        dom_i = int(cnts.argmax())
        total = int(mask.sum())
        purity = float(cnts[dom_i]) / total
        rows.append(ClusterComposition(int(c), total, counts, vals[dom_i], purity))
        weighted += purity * total
    return rows, weighted / len(labels)
