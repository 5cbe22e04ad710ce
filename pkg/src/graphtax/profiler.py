"""Sensitivity profiles and their hierarchical-clustering taxonomy."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import EvaluationError, GraphtaxError, InputError
from .graph import Dataset
from .harness import TrainConfig, aggregate, append_records, execute, plan_jobs
from .models import ModelConfig
from .perturb import CANONICAL_SUITE, IDENTITY, Perturbation, apply, parse_suite

log = logging.getLogger(__name__)

NEAR_CHANCE = "near-chance"
CSV_HEADER = ["dataset", "model", "perturbation", "raw_auroc", "raw_std", "relative_score", "flag"]


@dataclass(frozen=True)
class ProfileEntry:
    raw: float
    std: float
    relative: float


@dataclass
class SensitivityProfile:
    dataset: str
    model: str
    entries: dict[str, ProfileEntry]
    flag: str = ""

    @property
    def suite(self) -> list[str]:
        return list(self.entries)

    @property
    def baseline(self) -> float:
        return self.entries[IDENTITY.name].raw

    def vector(self) -> np.ndarray:
        """Relative scores in suite order, identity excluded."""
        return np.array([e.relative for k, e in self.entries.items() if k != IDENTITY.name])


def make_profile(dataset: str, model: str, raw: dict[str, tuple[float, float]],
                 margin: float = 0.02) -> SensitivityProfile:
    """Build a profile from ``{perturbation: (mean AUROC, std)}``; identity is the baseline."""
    if IDENTITY.name not in raw:
        raise InputError("profile needs an identity entry")
    base = raw[IDENTITY.name][0]
    if base <= 0:
        raise EvaluationError(f"{dataset}/{model}: baseline AUROC is 0, relative scores are undefined")
    entries = {}
    for name, (mean, std) in raw.items():
        if not 0.0 <= mean <= 1.0:
            raise InputError(f"{dataset}/{name}: AUROC {mean} outside [0, 1]")
        rel = 1.0 if name == IDENTITY.name else mean / base
        entries[name] = ProfileEntry(float(mean), float(std), float(rel))
    flag = NEAR_CHANCE if base < 0.5 + margin else ""
    if flag:
        log.warning("%s/%s: baseline AUROC %.3f is near chance; relative scores are unstable", dataset, model, base)
    return SensitivityProfile(dataset, model, entries, flag)


def compute_profiles(datasets: Sequence[Dataset], model_configs: Sequence[ModelConfig],
                     train_config: TrainConfig = TrainConfig(), suite=CANONICAL_SUITE,
                     workers: Optional[int] = None, margin: float = 0.02, log_path=None) -> list[SensitivityProfile]:
    """Profile every (dataset, model) pair; all training jobs share one pool."""
    suite = parse_suite(suite)
    jobs, keys = [], []
    for ds in datasets:
        for p in suite:
            perturbed = apply(p, ds)
            for mc in model_configs:
                tag = f"{ds.name}|{mc.kind.value}|{p.name}"
                keys.append((ds.name, mc.kind.value, p.name))
                jobs.extend(plan_jobs(perturbed, mc, train_config, tag=tag))
    t0 = time.perf_counter()
    outcomes = execute(jobs, workers)
    elapsed = time.perf_counter() - t0
    by_tag: dict[str, list] = {}
    for o in outcomes:
        by_tag.setdefault(o.tag, []).append(o)

    raw: dict[tuple[str, str], dict[str, tuple[float, float]]] = {}
    records = []
    for ds_name, model, pname in keys:
        tag = f"{ds_name}|{model}|{pname}"
        mode = "repetitions" if next(d for d in datasets if d.name == ds_name).split is not None else "cv"
        try:
            res = aggregate(by_tag[tag], mode, elapsed, train_config.max_divergence)
        except GraphtaxError as exc:
            raise type(exc)(f"{ds_name}/{model}/{pname}: {exc}") from exc
        raw.setdefault((ds_name, model), {})[pname] = (res.mean, res.std)
        records.extend(res.records(ds_name, model, pname))
    if log_path is not None:
        append_records(log_path, records)
    return [make_profile(d, m, r, margin) for (d, m), r in raw.items()]


def compute_profile(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
                    suite=CANONICAL_SUITE, workers: Optional[int] = None, margin: float = 0.02,
                    log_path=None) -> SensitivityProfile:
    return compute_profiles([dataset], [model_config], train_config, suite, workers, margin, log_path)[0]


# ---------------------------------------------------------------------------
# Ward clustering

@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    distance: float
    new_id: int
    size: int


def ward_linkage(points: np.ndarray) -> list[Merge]:
    """Agglomerative Ward clustering with the Lance-Williams distance update.

    Leaves are ``0..n-1`` and the i-th merge creates cluster ``n + i``, as in
    scipy.  Distances use the convention
    ``d(A, B) = sqrt(2 |A||B| / (|A| + |B|)) * ||mean(A) - mean(B)||``.
    Ties go to the pair with the smallest (min id, max id).
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise InputError("points must be a 2-D array")
    n = len(x)
    diff = x[:, None, :] - x[None, :, :]
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = float(np.sqrt((diff[i, j] ** 2).sum()))
    size = {i: 1 for i in range(n)}
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        a, b = min(((i, j) for idx, i in enumerate(active) for j in active[idx + 1:]),
                   key=lambda pair: (dist[pair], pair))
        d_ab = dist[(a, b)]
        new = n + step
        na, nb = size[a], size[b]
        active = [k for k in active if k not in (a, b)]
        for k in active:
            nk = size[k]
            dak = dist[(min(a, k), max(a, k))]
            dbk = dist[(min(b, k), max(b, k))]
            val = ((na + nk) * dak**2 + (nb + nk) * dbk**2 - nk * d_ab**2) / (na + nb + nk)
            dist[(k, new)] = math.sqrt(max(val, 0.0))
        active.append(new)
        size[new] = na + nb
        merges.append(Merge(a, b, d_ab, new, na + nb))
    return merges


def flat_clusters(merges: Sequence[Merge], n: int, n_clusters: int) -> list[int]:
    """Cluster id per leaf after undoing the last ``n_clusters - 1`` merges.

    Ids are numbered by the first leaf (in index order) of each cluster.
    """
    if not 1 <= n_clusters <= n:
        raise InputError(f"n_clusters must lie in [1, {n}]")
    parent = list(range(n + len(merges)))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m in merges[: n - n_clusters]:
        parent[root(m.a)] = m.new_id
        parent[root(m.b)] = m.new_id
    ids: dict[int, int] = {}
    return [ids.setdefault(root(i), len(ids)) for i in range(n)]


def leaf_order(merges: Sequence[Merge], n: int) -> list[int]:
    if n == 0:
        return []
    children = {m.new_id: (m.a, m.b) for m in merges}
    out, stack = [], [n + len(merges) - 1 if merges else 0]
    while stack:
        c = stack.pop()
        if c < n:
            out.append(c)
        else:
            a, b = children[c]
            stack.extend([b, a])
    return out


@dataclass
class TaxonomyResult:
    suite: list[str]
    datasets: list[str]
    matrix: np.ndarray
    merges: list[Merge]
    clusters: dict[str, int]
    model: str = ""
    n_clusters: int = 4
    raw: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "suite": self.suite,
            "datasets": self.datasets,
            "features": [s for s in self.suite if s != IDENTITY.name],
            "matrix": self.matrix.tolist(),
            "merges": [[m.a, m.b, m.distance] for m in self.merges],
            "n_clusters": self.n_clusters,
            "clusters": self.clusters,
        }


def cluster_profiles(profiles: Sequence[SensitivityProfile], n_clusters: int = 4) -> TaxonomyResult:
    if len(profiles) < 2:
        raise InputError("clustering needs at least two profiles")
    names = [p.dataset for p in profiles]
    if len(set(names)) != len(names):
        raise InputError("profiles must have distinct dataset names")
    suite = profiles[0].suite
    for p in profiles[1:]:
        if p.suite != suite:
            raise InputError(f"profile {p.dataset} uses suite {p.suite}, expected {suite}")
    models = sorted({p.model for p in profiles})
    ordered = sorted(profiles, key=lambda p: p.dataset)
    matrix = np.array([p.vector() for p in ordered]).reshape(len(ordered), -1)
    merges = ward_linkage(matrix)
    dists = [m.distance for m in merges]
    if any(b < a - 1e-12 * max(1.0, abs(a)) for a, b in zip(dists, dists[1:])):
        raise GraphtaxError("Ward merge distances decreased; linkage is not monotone")
    labels = flat_clusters(merges, len(ordered), n_clusters)
    return TaxonomyResult(
        suite=suite,
        datasets=[p.dataset for p in ordered],
        matrix=matrix,
        merges=merges,
        clusters={p.dataset: c for p, c in zip(ordered, labels)},
        model=",".join(models),
        n_clusters=n_clusters,
        raw={p.dataset: {k: e.raw for k, e in p.entries.items()} for p in ordered},
    )


# ---------------------------------------------------------------------------
# Export

def write_profiles_csv(profiles: Sequence[SensitivityProfile], path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for p in profiles:
                for name, e in p.entries.items():
                    w.writerow([p.dataset, p.model, name, repr(e.raw), repr(e.std), repr(e.relative), p.flag])
    except OSError as exc:
        raise GraphtaxError(f"{path}: cannot write profiles: {exc}") from exc


def read_profiles_csv(path) -> list[SensitivityProfile]:
    path = Path(path)
    grouped: dict[tuple[str, str], SensitivityProfile] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read profiles: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise InputError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise InputError(f"{path}:{lineno}: expected {len(CSV_HEADER)} columns")
            ds, model, pert, raw, std, rel, flag = row
            try:
                entry = ProfileEntry(float(raw), float(std), float(rel))
            except ValueError:
                raise InputError(f"{path}:{lineno}: unparsable number") from None
            prof = grouped.setdefault((ds, model), SensitivityProfile(ds, model, {}, flag))
            prof.entries[pert] = entry
    for prof in grouped.values():
        parse_suite(prof.suite)
    return list(grouped.values())


def write_taxonomy_json(tax: TaxonomyResult, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(tax.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise GraphtaxError(f"{path}: cannot write taxonomy: {exc}") from exc


def _color(rel: float) -> str:
    """Diverging blue-white-red scale centred at 1.0, saturating at 0.5 and 1.5."""
    t = max(-1.0, min(1.0, (rel - 1.0) / 0.5))
    if t < 0:
        r, g, b = 1 + t * (1 - 0.13), 1 + t * (1 - 0.40), 1 + t * (1 - 0.80)
    else:
        r, g, b = 1 - t * (1 - 0.80), 1 - t * (1 - 0.15), 1 - t * (1 - 0.15)
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in (r, g, b))


def heatmap_svg(tax: TaxonomyResult, profiles: Sequence[SensitivityProfile]) -> str:
    """Datasets x perturbations grid in dendrogram leaf order, tree on the left."""
    by_name = {p.dataset: p for p in profiles}
    n = len(tax.datasets)
    order = leaf_order(tax.merges, n)
    cols = tax.suite
    cell, tree_w, label_w, top = 36, 120, 140, 110
    width = tree_w + label_w + cell * len(cols) + 20
    height = top + cell * n + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    x0 = tree_w + label_w
    for j, name in enumerate(cols):
        cx = x0 + j * cell + cell / 2
        out.append(f'<text x="{cx:.1f}" y="{top - 6}" transform="rotate(-60 {cx:.1f} {top - 6})">{escape(name)}</text>')
    row_y = {}
    for r, leaf in enumerate(order):
        name = tax.datasets[leaf]
        y = top + r * cell
        row_y[leaf] = y + cell / 2
        out.append(f'<text x="{x0 - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end">{escape(name)}</text>')
        prof = by_name[name]
        for j, col in enumerate(cols):
            e = prof.entries[col]
            out.append(
                f'<rect class="cell" x="{x0 + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_color(e.relative)}" stroke="#ffffff"><title>{escape(name)} / {escape(col)}: '
                f'relative {e.relative:.3f}, AUROC {e.raw:.3f}</title></rect>'
            )
            out.append(f'<text x="{x0 + j * cell + cell / 2}" y="{y + cell / 2 + 4:.1f}" '
                       f'text-anchor="middle" font-size="9">{e.relative:.2f}</text>')
    # dendrogram: leaves at the right edge of the tree margin, root towards the left
    max_d = max((m.distance for m in tax.merges), default=0.0) or 1.0
    pos = {leaf: (tree_w - 4.0, y) for leaf, y in row_y.items()}
    for m in tax.merges:
        xa, ya = pos[m.a]
        xb, yb = pos[m.b]
        x = tree_w - 4.0 - (tree_w - 12.0) * m.distance / max_d
        out.append(f'<path class="tree" d="M{xa:.1f},{ya:.1f}H{x:.1f}V{yb:.1f}H{xb:.1f}" '
                   f'fill="none" stroke="#333333"/>')
        pos[m.new_id] = (x, (ya + yb) / 2)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export(tax: TaxonomyResult, profiles: Sequence[SensitivityProfile], out_dir,
           profiles_csv: Optional[str] = "profiles.csv") -> dict[str, Path]:
    """Write profiles CSV (unless ``profiles_csv`` is None), taxonomy JSON and heatmap SVG."""
    out_dir = Path(out_dir)
    paths = {"taxonomy": out_dir / "taxonomy.json", "heatmap": out_dir / "heatmap.svg"}
    if profiles_csv:
        paths["profiles"] = out_dir / profiles_csv
        write_profiles_csv(profiles, paths["profiles"])
    write_taxonomy_json(tax, paths["taxonomy"])
    try:
        paths["heatmap"].write_text(heatmap_svg(tax, profiles), encoding="utf-8")
    except OSError as exc:
        raise GraphtaxError(f"{paths['heatmap']}: cannot write heatmap: {exc}") from exc
    return paths


__all__ = [
    "Merge",
    "Perturbation",
    "ProfileEntry",
    "SensitivityProfile",
    "TaxonomyResult",
    "cluster_profiles",
    "compute_profile",
    "compute_profiles",
    "export",
    "flat_clusters",
    "heatmap_svg",
    "leaf_order",
    "make_profile",
    "read_profiles_csv",
    "ward_linkage",
    "write_profiles_csv",
    "write_taxonomy_json",
]
