"""Drugs, signed interaction edges, patients and prescriptions.

CSV schemas (UTF-8, header row required):

* ``drugs.csv``: ``id,name,f0..f{d2-1}``
* ``ddi_edges.csv``: ``u,v,sign`` with sign in {-1, 1}
* ``patients.csv``: ``id,x0..x{d1-1}``
* ``prescriptions.csv``: ``patient_id,drug_id``

``Cohort.save``/``Cohort.load`` additionally use ``splits.csv``
(``patient_id,split``) so a split can round-trip exactly.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError, SamplingError

VARIANCE_FLOOR = 1e-12


@dataclass
class Drug:
    id: int
    name: str
    feature: np.ndarray


@dataclass(frozen=True)
class DdiEdge:
    u: int
    v: int
    sign: int

    def key(self):
        return (min(self.u, self.v), max(self.u, self.v))


class DdiGraph:
    """Undirected drug graph with signed edges (+1 synergy, -1 antagonism,
    0 sampled no-interaction)."""

    def __init__(self, drugs, edges=()):
        self.drugs = list(drugs)
        ids = [d.id for d in self.drugs]
        if ids != list(range(len(ids))):
            raise IngestionError("drug ids must be dense 0..|V|-1 and sorted")
        dims = {d.feature.shape for d in self.drugs}
        if len(dims) > 1:
            raise IngestionError("drug feature dimensions are not uniform")
        self.edges = []
        self._by_pair = {}
        for e in edges:
            self.add_edge(e)

    @property
    def n_drugs(self):
        return len(self.drugs)

    def add_edge(self, edge):
        if edge.u == edge.v:
            raise IngestionError(f"self-loop edge ({edge.u},{edge.v})")
        for endpoint in (edge.u, edge.v):
            if not 0 <= endpoint < self.n_drugs:
                raise IngestionError(f"edge references unknown drug id {endpoint}")
        key = edge.key()
        if key in self._by_pair:
            raise IngestionError(f"duplicate edge for pair {key}")
        self._by_pair[key] = edge
        self.edges.append(edge)

    def sign_of(self, u, v):
        e = self._by_pair.get((min(u, v), max(u, v)))
        return None if e is None else e.sign

    def edges_with_sign(self, sign):
        return [e for e in self.edges if e.sign == sign]

    def signed_edges(self):
        """Edges carrying a real interaction (sign != 0)."""
        return [e for e in self.edges if e.sign != 0]

    def neighbors(self, v, signs=(-1, 0, 1)):
        out = []
        for e in self.edges:
            if e.sign not in signs:
                continue
            if e.u == v:
                out.append(e.v)
            elif e.v == v:
                out.append(e.u)
        return sorted(out)

    def adjacency_by_sign(self):
        """{sign: list of sorted neighbor lists per drug}."""
        index = {s: [[] for _ in range(self.n_drugs)] for s in (-1, 0, 1)}
        for e in self.edges:
            index[e.sign][e.u].append(e.v)
            index[e.sign][e.v].append(e.u)
        for s in index:
            for lst in index[s]:
                lst.sort()
        return index

    def feature_matrix(self):
        return np.stack([d.feature for d in self.drugs])

    def save(self, drug_file, edge_file):
        d2 = self.drugs[0].feature.size if self.drugs else 0
        with open(drug_file, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "name"] + [f"f{i}" for i in range(d2)])
            for d in self.drugs:
                w.writerow([d.id, d.name] + [repr(float(x)) for x in d.feature])
        with open(edge_file, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "sign"])
            for e in self.edges:
                if e.sign != 0:
                    w.writerow([e.u, e.v, e.sign])


def load_ddi_graph(drug_file, edge_file):
    """Build a DdiGraph from the drugs/edges CSV files."""
    drugs = []
    with open(drug_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise IngestionError(f"{drug_file}: missing or bad header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                drug_id = int(row[0])
                feature = np.array([float(x) for x in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise IngestionError(f"{drug_file}:{lineno}: {exc}") from exc
            drugs.append(Drug(drug_id, row[1], feature))
    drugs.sort(key=lambda d: d.id)
    graph = DdiGraph(drugs)

    with open(edge_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:3]] != ["u", "v", "sign"]:
            raise IngestionError(f"{edge_file}: missing or bad header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                u, v, sign = int(row[0]), int(row[1]), int(row[2])
            except ValueError as exc:
                raise IngestionError(f"{edge_file}:{lineno}: {exc}") from exc
            if sign not in (-1, 1):
                raise IngestionError(f"{edge_file}:{lineno}: sign must be -1 or 1")
            try:
                graph.add_edge(DdiEdge(u, v, sign))
            except IngestionError as exc:
                raise IngestionError(f"{edge_file}:{lineno}: {exc}") from exc
    return graph


def sample_zero_edges(graph, count=None, seed=0):
    """Sample non-adjacent drug pairs as sign-0 edges; deterministic by seed.

    ``count`` defaults to the number of existing signed edges (1:1).
    The sampled edges are returned and also added to the graph.
    """
    if count is None:
        count = len(graph.signed_edges())
    free = [
        (u, v)
        for u in range(graph.n_drugs)
        for v in range(u + 1, graph.n_drugs)
        if (u, v) not in graph._by_pair
    ]
    if count > len(free):
        raise SamplingError(
            f"requested {count} zero edges but only {len(free)} free pairs exist"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(free), size=count, replace=False)
    sampled = [DdiEdge(free[i][0], free[i][1], 0) for i in sorted(chosen)]
    for e in sampled:
        graph.add_edge(e)
    return sampled


# ---------------------------------------------------------------------
# cohort
# ---------------------------------------------------------------------


@dataclass
class Cohort:
    """Patient features, binary medication matrix and a train/val/test split.

    ``x_raw`` keeps the features exactly as loaded; ``x`` is standardized
    per feature with statistics computed over training rows only.
    """

    patient_ids: list
    x_raw: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    feature_mean: np.ndarray = field(default=None)
    feature_std: np.ndarray = field(default=None)
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.feature_mean is None:
            self._standardize()

    def _standardize(self):
        train = self.x_raw[self.train_idx]
        self.feature_mean = train.mean(axis=0)
        var = train.var(axis=0)
        std = np.sqrt(var)
        std = np.where(std < VARIANCE_FLOOR, 1.0, std)
        self.feature_std = std
        self.x = (self.x_raw - self.feature_mean) / self.feature_std
        constant = var < VARIANCE_FLOOR
        self.x[:, constant] = 0.0

    def standardize_features(self, raw):
        """Map raw feature rows into the cohort's standardized space."""
        raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
        out = (raw - self.feature_mean) / self.feature_std
        train_var = self.x_raw[self.train_idx].var(axis=0)
        out[:, train_var < VARIANCE_FLOOR] = 0.0
        return out

    @property
    def n_patients(self):
        return len(self.patient_ids)

    @property
    def n_drugs(self):
        return self.y.shape[1]

    def split_of(self, idx):
        if idx in set(self.train_idx):
            return "train"
        if idx in set(self.val_idx):
            return "val"
        return "test"

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        d1 = self.x_raw.shape[1]
        with open(directory / "patients.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id"] + [f"x{i}" for i in range(d1)])
            for pid, row in zip(self.patient_ids, self.x_raw):
                w.writerow([pid] + [repr(float(x)) for x in row])
        with open(
            directory / "prescriptions.csv", "w", newline="", encoding="utf-8"
        ) as fh:
            w = csv.writer(fh)
            w.writerow(["patient_id", "drug_id"])
            for i, pid in enumerate(self.patient_ids):
                for v in np.flatnonzero(self.y[i]):
                    w.writerow([pid, int(v)])
        with open(directory / "splits.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["patient_id", "split"])
            for name, idx in (
                ("train", self.train_idx),
                ("val", self.val_idx),
                ("test", self.test_idx),
            ):
                for i in idx:
                    w.writerow([self.patient_ids[i], name])

    @classmethod
    def load(cls, directory, n_drugs):
        directory = Path(directory)
        splits = {}
        with open(directory / "splits.csv", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                splits[int(row["patient_id"])] = row["split"]
        return load_cohort(
            directory / "patients.csv",
            directory / "prescriptions.csv",
            n_drugs=n_drugs,
            explicit_splits=splits,
        )


def split_sizes(n, ratio):
    """Integer split sizes following ratio within rounding."""
    total = sum(ratio)
    sizes = [int(np.floor(n * r / total)) for r in ratio]
    remainder = n - sum(sizes)
    for i in range(remainder):
        sizes[i % len(sizes)] += 1
    return sizes


def load_cohort(
    patient_file,
    prescription_file,
    split_ratio=(5, 3, 2),
    seed=0,
    n_drugs=None,
    explicit_splits=None,
):
    """Load patients and prescriptions; standardize X on the training split.

    The split is a seeded permutation cut at ``split_ratio`` unless
    ``explicit_splits`` maps each patient id to train/val/test directly.
    Training patients with zero prescriptions are dropped from the
    training split with a warning.
    """
    ids, rows = [], []
    with open(patient_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise IngestionError(f"{patient_file}: missing or bad header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ids.append(int(row[0]))
                values = []
                for cell in row[1:]:
                    if cell.strip() == "":
                        values.append(np.nan)
                    else:
                        values.append(float(cell))
                rows.append(values)
            except ValueError as exc:
                raise IngestionError(f"{patient_file}:{lineno}: {exc}") from exc
    x_raw = np.array(rows, dtype=np.float64)
    id_to_idx = {pid: i for i, pid in enumerate(ids)}
    if len(id_to_idx) != len(ids):
        raise IngestionError(f"{patient_file}: duplicate patient ids")

    prescriptions = []
    max_drug = -1
    with open(prescription_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "patient_id":
            raise IngestionError(f"{prescription_file}: missing or bad header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pid, did = int(row[0]), int(row[1])
            except ValueError as exc:
                raise IngestionError(f"{prescription_file}:{lineno}: {exc}") from exc
            if pid not in id_to_idx:
                raise IngestionError(
                    f"{prescription_file}:{lineno}: unknown patient id {pid}"
                )
            if n_drugs is not None and not 0 <= did < n_drugs:
                raise IngestionError(
                    f"{prescription_file}:{lineno}: unknown drug id {did}"
                )
            prescriptions.append((pid, did))
            max_drug = max(max_drug, did)
    if n_drugs is None:
        n_drugs = max_drug + 1
    y = np.zeros((len(ids), n_drugs))
    for pid, did in prescriptions:
        y[id_to_idx[pid], did] = 1.0

    n = len(ids)
    if explicit_splits is not None:
        train_idx = np.array(
            [i for i, pid in enumerate(ids) if explicit_splits.get(pid) == "train"],
            dtype=np.intp,
        )
        val_idx = np.array(
            [i for i, pid in enumerate(ids) if explicit_splits.get(pid) == "val"],
            dtype=np.intp,
        )
        test_idx = np.array(
            [i for i, pid in enumerate(ids) if explicit_splits.get(pid) == "test"],
            dtype=np.intp,
        )
    else:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        n_train, n_val, _ = split_sizes(n, split_ratio)
        train_idx = np.sort(perm[:n_train])
        val_idx = np.sort(perm[n_train : n_train + n_val])
        test_idx = np.sort(perm[n_train + n_val :])

    empty = [i for i in train_idx if y[i].sum() == 0]
    if empty:
        warnings.warn(
            f"excluding {len(empty)} training patient(s) with zero prescriptions",
            stacklevel=2,
        )
        keep = [i for i in train_idx if y[i].sum() > 0]
        train_idx = np.array(keep, dtype=np.intp)

    # training-split column-mean imputation for missing cells
    imputed_columns = []
    if np.isnan(x_raw).any():
        train_mean = np.nanmean(x_raw[train_idx], axis=0)
        if np.isnan(train_mean).any():
            bad = int(np.flatnonzero(np.isnan(train_mean))[0])
            raise IngestionError(
                f"{patient_file}: feature column x{bad} has no observed "
                "training values to impute from"
            )
        nan_r, nan_c = np.where(np.isnan(x_raw))
        imputed_columns = sorted(set(int(c) for c in nan_c))
        x_raw[nan_r, nan_c] = train_mean[nan_c]

    cohort = Cohort(ids, x_raw, y, train_idx, val_idx, test_idx)
    cohort.imputed_columns = imputed_columns
    return cohort
