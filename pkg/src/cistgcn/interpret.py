"""Saliency maps, importance vectors and their cluster analysis."""
import logging
import os
from dataclasses import dataclass

import numpy as np

from .data.augment import pivot, rotate_y
from .model.network import build_input_features
from .tensor import dump, no_grad
from .training.loss import per_joint_distance

log = logging.getLogger(__name__)


@dataclass
class SaliencyMap:
    layer_name: str
    matrix: np.ndarray
    mean: float
    std: float
    normalized: bool = True


@dataclass
class ImportanceRecord:
    sample_id: str
    action_label: str
    vector: np.ndarray
    mpjpe: float


def extract_bundle(model, inputs):
    """Predictions and interpretation bundle from one eval-mode forward pass.

    ``inputs`` is a (t1, J, 3) window or a batch of them.
    """
    x = np.asarray(inputs, dtype=np.float64)
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            pred, bundle = model(build_input_features(x), x[..., -1, :, :])
    finally:
        model.train(was_training)
    return pred.data.astype(np.float64), bundle


def normalize_map(matrix, layer_name=""):
    """Min-max scale to [0, 1]; a constant matrix becomes all 0.5."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi > lo:
        out = (m - lo) / (hi - lo)
    else:
        out = np.full_like(m, 0.5)
    return SaliencyMap(layer_name, out, float(m.mean()), float(m.std()), True)


def layer_average(bundles, layer_name):
    """Elementwise mean of one layer's map over single-sample bundles, then normalized."""
    if not bundles:
        raise ValueError("no bundles to average")
    stack = np.stack([np.asarray(b.maps()[layer_name], dtype=np.float64) for b in bundles])
    return normalize_map(stack.mean(axis=0), layer_name)


def importance_table(model, windows, ids=None, batch_size=256):
    """One :class:`ImportanceRecord` per window, in window order."""
    records = []
    for s in range(0, len(windows), batch_size):
        x = windows.inputs[s:s + batch_size]
        pred, bundle = extract_bundle(model, x)
        vectors = bundle.importance_vector().astype(np.float64)
        errors = per_joint_distance(pred, windows.targets[s:s + batch_size]).mean(axis=(1, 2))
        for k in range(len(x)):
            i = s + k
            sid = ids[i] if ids is not None else f"{windows.seq_ids[i]}:{i}"
            records.append(ImportanceRecord(str(sid), windows.actions[i], vectors[k], float(errors[k])))
    return records


def centroid_analysis(records):
    """Per-class centroids and intra-class spread, plus a global separation score.

    ``separation = (inter - intra) / max(inter, intra)`` where ``inter`` is the
    mean distance between class centroids and ``intra`` the mean distance of
    samples to their own centroid, averaged over classes. Classes with fewer
    than two samples are skipped. With fewer than two classes ``inter`` and
    ``separation`` are ``None``.
    """
    by_class = {}
    for r in records:
        by_class.setdefault(r.action_label, []).append(np.asarray(r.vector, dtype=np.float64))
    classes = {}
    for label in sorted(by_class):
        vecs = np.stack(by_class[label])
        if len(vecs) < 2:
            log.warning("class %r has %d sample(s); excluded from centroid analysis", label, len(vecs))
            continue
        c = vecs.mean(axis=0)
        classes[label] = {"centroid": c, "intra": float(np.linalg.norm(vecs - c, axis=1).mean()),
                          "count": len(vecs)}
    intra = float(np.mean([v["intra"] for v in classes.values()])) if classes else None
    result = {"classes": classes, "intra": intra, "inter": None, "separation": None}
    labels = list(classes)
    if len(labels) >= 2:
        d = [np.linalg.norm(classes[a]["centroid"] - classes[b]["centroid"])
             for i, a in enumerate(labels) for b in labels[i + 1:]]
        inter = float(np.mean(d))
        denom = max(inter, intra)
        result["inter"] = inter
        result["separation"] = (inter - intra) / denom if denom > 0 else 0.0
    return result


OUTPUT_LAYERS = ("dsgn-out", "tsgn-out")


def _normalized_maps(bundle, layers):
    maps = bundle.maps()
    per_layer = [np.stack([normalize_map(m).matrix.ravel() for m in maps[name]]) for name in layers]
    return np.concatenate(per_layer, axis=1)


def transform_stability(model, windows, degrees=90.0, samples=64, seed=0, layers=OUTPUT_LAYERS):
    """Map distances under a yaw rotation versus across action classes.

    For each of up to ``samples`` windows (drawn with ``seed``), ``self`` is the
    Frobenius distance between its normalized ``layers`` maps and those of its
    copy rotated by ``degrees`` about the last frame's centroid; ``cross`` is
    the distance to the maps of a randomly drawn window of another action.
    Returns a dict with both arrays and their medians.
    """
    rng = np.random.default_rng(seed)
    actions = np.asarray(windows.actions)
    if len(set(actions.tolist())) < 2:
        raise ValueError("transform stability needs at least two actions")
    idx = rng.permutation(len(windows))[:samples]
    partner = np.array([rng.choice(np.flatnonzero(actions != actions[i])) for i in idx])
    x = windows.inputs.astype(np.float64)
    rotated = rotate_y(x[idx], degrees, pivot(x[idx])[:, None, None, :])
    base = _normalized_maps(extract_bundle(model, x[idx])[1], layers)
    turned = _normalized_maps(extract_bundle(model, rotated)[1], layers)
    other = _normalized_maps(extract_bundle(model, x[partner])[1], layers)
    d_self = np.linalg.norm(base - turned, axis=1)
    d_cross = np.linalg.norm(base - other, axis=1)
    return {"self": d_self, "cross": d_cross,
            "median_self": float(np.median(d_self)), "median_cross": float(np.median(d_cross))}


def raw_pose_records(windows):
    """Records whose vectors are the flattened input windows, for comparison."""
    flat = windows.inputs.reshape(len(windows), -1).astype(np.float64)
    return [ImportanceRecord(f"{windows.seq_ids[i]}:{i}", windows.actions[i], flat[i], float("nan"))
            for i in range(len(windows))]


def pca_project(vectors, dims=2, iters=500, seed=0, tol=1e-12):
    """Project rows onto the top ``dims`` principal directions.

    Directions come from power iteration with deflation on the covariance
    matrix; each direction's sign is fixed so its largest component is
    positive. Returns ``(coords, components)``.
    """
    X = np.asarray([getattr(v, "vector", v) for v in vectors], dtype=np.float64)
    X = X - X.mean(axis=0)
    C = X.T @ X / max(1, len(X) - 1)
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(min(dims, X.shape[1])):
        v = rng.normal(size=C.shape[0])
        for prev in comps:
            v -= (v @ prev) * prev
        v /= np.linalg.norm(v)
        for _ in range(iters):
            w = C @ v
            for prev in comps:
                w -= (w @ prev) * prev
            n = np.linalg.norm(w)
            if n == 0:
                break
            w /= n
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        comps.append(v)
    components = np.stack(comps)
    return X @ components.T, components


def export_bundle(bundle, directory):
    """Write every map of a single-sample bundle as a TNSR dump plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    lines = []
    for name, matrix in bundle.maps().items():
        m = np.asarray(matrix, dtype=np.float64)
        dump.save(os.path.join(directory, f"{name}.tnsr"), m.astype(np.float32))
        lines.append(f"{name}\t{m.shape[0]}\t{m.shape[1]}\t{m.mean():.9g}\t{m.std():.9g}\n")
    with open(os.path.join(directory, "manifest.tsv"), "w", encoding="utf-8") as f:
        f.writelines(lines)


def write_importance_tsv(records, path):
    with open(path, "w", encoding="utf-8") as f:
        if not records:
            return
        n = len(records[0].vector)
        f.write("sample_id\taction\tmpjpe\t" + "\t".join(f"v{i}" for i in range(n)) + "\n")
        for r in records:
            values = "\t".join(f"{v:.9g}" for v in r.vector)
            f.write(f"{r.sample_id}\t{r.action_label}\t{r.mpjpe:.6f}\t{values}\n")


def write_centroids_tsv(analysis, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("class\tcount\tintra\n")
        for label, c in analysis["classes"].items():
            f.write(f"{label}\t{c['count']}\t{c['intra']:.6f}\n")
        for key in ("intra", "inter", "separation"):
            value = analysis[key]
            f.write(f"#{key}\t\t{'' if value is None else f'{value:.6f}'}\n")


def write_pca_tsv(records, coords, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("sample_id\taction\tmpjpe\t" + "\t".join(f"pc{i + 1}" for i in range(coords.shape[1])) + "\n")
        for r, c in zip(records, coords):
            f.write(f"{r.sample_id}\t{r.action_label}\t{r.mpjpe:.6f}\t" +
                    "\t".join(f"{v:.9g}" for v in c) + "\n")
