"""On-disk interchange formats.

Binary formats are little-endian with a 4-byte magic, a u32 version, and a
provenance string (the run's config hash, empty outside CLI runs):

* NRSP: response tensor. Header: n_electrodes, n_events, n_bins, f64 bin
  centers, electrode table (id, subject, region). Payload row-major f32.
* NFEA: one (model, layer) feature matrix. Header: model_id, layer_id, n, D,
  dtype code (0 = f32), projected flag, projection seed. Payload row-major f32.
* NSCR: one model's scores. Header: layer table, electrode ids, lambda grid,
  chosen layer per electrode, chosen lambda index per (layer, electrode).
  Payload f32 [layer, electrode, bin, split] with splits (train, val, test).

CSV files are UTF-8, comma-separated, one header row, '.' decimal separator.
Writers prepend a single ``# config_hash=...`` comment carrying provenance;
readers skip any leading ``#`` lines. Small data may substitute CSV for the
binary response/feature formats.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brainenc.comparison import ComparisonVerdict, ModalityClass, ModelSpec, VerdictKind
from brainenc.encoder import LayerScores, ModelScores, SPLIT_NAMES
from brainenc.errors import DataError
from brainenc.events import Alignment, ElectrodeMeta, EventStructure, ResponseTensor

NRSP_MAGIC = b"NRSP"
NFEA_MAGIC = b"NFEA"
NSCR_MAGIC = b"NSCR"
FORMAT_VERSION = 1
_DTYPE_F32 = 0


# ---------------------------------------------------------------------------
# binary primitives

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.buf = memoryview(data)
        self.pos = 0
        self.path = path

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise DataError(f"{self.path}: truncated file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def text(self) -> str:
        return bytes(self.take(self.u32())).decode("utf-8")

    def array(self, dtype: str, count: int) -> np.ndarray:
        arr = np.frombuffer(self.take(count * np.dtype(dtype).itemsize), dtype=dtype)
        return arr.copy()


def _open_binary(path: str | Path, magic: bytes) -> _Reader:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    got = bytes(reader.take(4))
    if got != magic:
        raise DataError(f"{path}: expected magic {magic!r}, found {got!r}")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    return reader


# ---------------------------------------------------------------------------
# NRSP response tensor

def write_nrsp(path: str | Path, tensor: ResponseTensor, config_hash: str = "") -> None:
    out = io.BytesIO()
    out.write(NRSP_MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(_pack_str(config_hash))
    out.write(
        struct.pack("<III", tensor.n_electrodes, tensor.n_events, tensor.n_bins)
    )
    out.write(np.asarray(tensor.bin_centers_ms, dtype="<f8").tobytes())
    for e in tensor.electrodes:
        out.write(struct.pack("<qq", e.electrode_id, e.subject_id))
        out.write(_pack_str(e.region_label))
    out.write(np.ascontiguousarray(tensor.values, dtype="<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


def read_nrsp(path: str | Path) -> tuple[ResponseTensor, str]:
    reader = _open_binary(path, NRSP_MAGIC)
    config_hash = reader.text()
    n_e, n_ev, n_b = struct.unpack("<III", reader.take(12))
    centers = reader.array("<f8", n_b)
    electrodes = []
    for _ in range(n_e):
        eid, sid = struct.unpack("<qq", reader.take(16))
        electrodes.append(ElectrodeMeta(eid, sid, reader.text()))
    values = reader.array("<f4", n_e * n_ev * n_b).astype(np.float64)
    tensor = ResponseTensor(
        electrodes=tuple(electrodes),
        values=values.reshape(n_e, n_ev, n_b),
        bin_centers_ms=centers,
    )
    return tensor, config_hash


# ---------------------------------------------------------------------------
# NFEA feature matrix

def write_nfea(
    path: str | Path,
    F: np.ndarray,
    model_id: str,
    layer_id: str,
    projected: bool = False,
    seed: int = 0,
    config_hash: str = "",
) -> None:
    F = np.asarray(F)
    if F.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    out = io.BytesIO()
    out.write(NFEA_MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(_pack_str(config_hash))
    out.write(_pack_str(model_id))
    out.write(_pack_str(layer_id))
    out.write(struct.pack("<IIBBq", F.shape[0], F.shape[1], _DTYPE_F32, int(projected), seed))
    out.write(np.ascontiguousarray(F, dtype="<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


@dataclass
class FeatureFile:
    model_id: str
    layer_id: str
    F: np.ndarray
    projected: bool
    seed: int
    config_hash: str


def read_nfea(path: str | Path) -> FeatureFile:
    reader = _open_binary(path, NFEA_MAGIC)
    config_hash = reader.text()
    model_id = reader.text()
    layer_id = reader.text()
    n, d, dtype_code, projected, seed = struct.unpack("<IIBBq", reader.take(18))
    if dtype_code != _DTYPE_F32:
        raise DataError(f"{path}: unknown dtype code {dtype_code}")
    F = reader.array("<f4", n * d).astype(np.float64).reshape(n, d)
    return FeatureFile(model_id, layer_id, F, bool(projected), seed, config_hash)


# ---------------------------------------------------------------------------
# NSCR score tensor (one model per file)

def write_nscr(
    path: str | Path,
    scores: ModelScores,
    electrode_ids: list[int],
    config_hash: str = "",
) -> None:
    n_layers = len(scores.layers)
    n_e = len(electrode_ids)
    n_b = scores.layers[0].scores.shape[1]
    out = io.BytesIO()
    out.write(NSCR_MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(_pack_str(config_hash))
    out.write(_pack_str(scores.model_id))
    out.write(struct.pack("<IIIB", n_layers, n_e, n_b, len(SPLIT_NAMES)))
    out.write(struct.pack("<I", scores.lambda_grid.size))
    out.write(np.asarray(scores.lambda_grid, dtype="<f8").tobytes())
    for layer_id in scores.layer_ids:
        out.write(_pack_str(layer_id))
    out.write(np.asarray(electrode_ids, dtype="<i8").tobytes())
    out.write(np.asarray(scores.chosen_layer, dtype="<i4").tobytes())
    lam = np.stack([ls.lambda_idx for ls in scores.layers]).astype("<i4")
    out.write(lam.tobytes())
    payload = np.stack([ls.scores for ls in scores.layers])
    out.write(np.ascontiguousarray(payload, dtype="<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


def read_nscr(path: str | Path) -> tuple[ModelScores, list[int], str]:
    reader = _open_binary(path, NSCR_MAGIC)
    config_hash = reader.text()
    model_id = reader.text()
    n_layers, n_e, n_b, n_splits = struct.unpack("<IIIB", reader.take(13))
    if n_splits != len(SPLIT_NAMES):
        raise DataError(f"{path}: unexpected split count {n_splits}")
    n_lambda = reader.u32()
    grid = reader.array("<f8", n_lambda)
    layer_ids = [reader.text() for _ in range(n_layers)]
    electrode_ids = [int(v) for v in reader.array("<i8", n_e)]
    chosen = reader.array("<i4", n_e).astype(np.int64)
    lam_idx = reader.array("<i4", n_layers * n_e).astype(np.int64).reshape(n_layers, n_e)
    payload = (
        reader.array("<f4", n_layers * n_e * n_b * n_splits)
        .astype(np.float64)
        .reshape(n_layers, n_e, n_b, n_splits)
    )
    layers = [
        LayerScores(layer_id=layer_ids[i], scores=payload[i], lambda_idx=lam_idx[i])
        for i in range(n_layers)
    ]
    scores = ModelScores(
        model_id=model_id,
        layer_ids=layer_ids,
        layers=layers,
        chosen_layer=chosen,
        lambda_grid=grid,
    )
    return scores, electrode_ids, config_hash


# ---------------------------------------------------------------------------
# CSV helpers

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: str | Path, header: list[str], rows, config_hash: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise DataError(f"{path}: empty CSV")
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# events / electrodes

def write_events_csv(path: str | Path, events: list[EventStructure], config_hash: str = "") -> None:
    write_csv(
        path,
        ["event_id", "onset_ms", "text", "image_ref", "alignment"],
        (
            [ev.event_id, ev.onset_ms, ev.text, ev.image_ref, ev.alignment.value]
            for ev in events
        ),
        config_hash,
    )


def read_events_csv(path: str | Path) -> list[EventStructure]:
    header, rows = read_csv(path)
    expected = ["event_id", "onset_ms", "text", "image_ref", "alignment"]
    if header != expected:
        raise DataError(f"{path}: expected columns {expected}, found {header}")
    events = []
    for row in rows:
        try:
            events.append(
                EventStructure(
                    event_id=int(row[0]),
                    onset_ms=float(row[1]),
                    text=row[2],
                    image_ref=row[3],
                    alignment=Alignment(row[4]),
                )
            )
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad event row {row}: {exc}") from exc
    return events


def write_electrodes_csv(
    path: str | Path, electrodes: list[ElectrodeMeta], config_hash: str = ""
) -> None:
    rows = []
    for e in electrodes:
        xyz = e.coordinates if e.coordinates is not None else ("", "", "")
        rows.append([e.electrode_id, e.subject_id, e.region_label, *xyz])
    write_csv(
        path,
        ["electrode_id", "subject_id", "region_label", "x", "y", "z"],
        rows,
        config_hash,
    )


def read_electrodes_csv(path: str | Path) -> list[ElectrodeMeta]:
    header, rows = read_csv(path)
    expected = ["electrode_id", "subject_id", "region_label", "x", "y", "z"]
    if header != expected:
        raise DataError(f"{path}: expected columns {expected}, found {header}")
    out = []
    for row in rows:
        try:
            coords = None
            if row[3] != "":
                coords = (float(row[3]), float(row[4]), float(row[5]))
            out.append(ElectrodeMeta(int(row[0]), int(row[1]), row[2], coords))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad electrode row {row}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# CSV alternatives for responses and features

def write_response_csv(path: str | Path, tensor: ResponseTensor, config_hash: str = "") -> None:
    """Long-form alternative: one row per electrode x event x bin."""
    def rows():
        ids = tensor.electrode_ids()
        for i in range(tensor.n_electrodes):
            for j in range(tensor.n_events):
                for b in range(tensor.n_bins):
                    yield [ids[i], j, b, tensor.values[i, j, b]]

    write_csv(path, ["electrode_id", "event_index", "bin", "value"], rows(), config_hash)


def read_response_csv(
    path: str | Path,
    electrodes: list[ElectrodeMeta],
    bin_centers_ms: np.ndarray,
) -> ResponseTensor:
    """Assemble a tensor from long-form CSV plus external electrode metadata."""
    header, rows = read_csv(path)
    if header != ["electrode_id", "event_index", "bin", "value"]:
        raise DataError(f"{path}: unexpected response CSV columns {header}")
    eids = np.array([int(r[0]) for r in rows])
    evs = np.array([int(r[1]) for r in rows])
    bins = np.array([int(r[2]) for r in rows])
    vals = np.array([float(r[3]) for r in rows])
    order = {e.electrode_id: i for i, e in enumerate(electrodes)}
    unknown = sorted(set(eids) - set(order))
    if unknown:
        raise DataError(f"{path}: rows for electrodes missing from metadata: {unknown}")
    n_ev, n_b = evs.max() + 1, bins.max() + 1
    if n_b != len(bin_centers_ms):
        raise DataError(f"{path}: {n_b} bins in CSV vs {len(bin_centers_ms)} bin centers")
    values = np.full((len(electrodes), n_ev, n_b), np.nan)
    rows_idx = np.array([order[int(e)] for e in eids])
    values[rows_idx, evs, bins] = vals
    if np.isnan(values).any():
        raise DataError(f"{path}: response CSV leaves missing cells (absent data is disallowed)")
    return ResponseTensor(
        electrodes=tuple(electrodes), values=values, bin_centers_ms=bin_centers_ms
    )


def write_features_csv(path: str | Path, F: np.ndarray, config_hash: str = "") -> None:
    F = np.asarray(F)
    header = [f"f{j}" for j in range(F.shape[1])]
    write_csv(path, header, ([v for v in row] for row in F), config_hash)


def read_features_csv(path: str | Path) -> np.ndarray:
    header, rows = read_csv(path)
    if not all(name == f"f{j}" for j, name in enumerate(header)):
        raise DataError(f"{path}: feature CSV header must be f0..f{len(header) - 1}")
    try:
        return np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric feature value: {exc}") from exc


# ---------------------------------------------------------------------------
# model zoo manifest

@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    layer_id: str
    path: str
    modality_class: ModalityClass
    trained: bool

    def spec(self) -> ModelSpec:
        return ModelSpec(self.model_id, self.modality_class, self.trained)


def write_manifest(path: str | Path, entries: list[ManifestEntry], config_hash: str = "") -> None:
    payload = {
        "config_hash": config_hash,
        "models": [
            {
                "model_id": e.model_id,
                "layer_id": e.layer_id,
                "path": e.path,
                "modality_class": e.modality_class.value,
                "trained": e.trained,
            }
            for e in entries
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    try:
        payload = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid manifest JSON: {exc}") from exc
    entries = []
    seen = set()
    for item in payload.get("models", []):
        try:
            entry = ManifestEntry(
                model_id=item["model_id"],
                layer_id=item["layer_id"],
                path=item["path"],
                modality_class=ModalityClass(item["modality_class"]),
                trained=bool(item["trained"]),
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: bad manifest entry {item}: {exc}") from exc
        key = (entry.model_id, entry.layer_id)
        if key in seen:
            raise DataError(f"{path}: duplicate manifest entry for {key}")
        seen.add(key)
        entry.spec()  # validates the class/trained combination
        entries.append(entry)
    if not entries:
        raise DataError(f"{path}: manifest lists no models")
    return entries


# ---------------------------------------------------------------------------
# analysis outputs

def write_scores_csv(
    path: str | Path,
    scores_by_model: dict[str, ModelScores],
    electrode_ids: list[int],
    config_hash: str = "",
) -> None:
    def rows():
        for model_id in sorted(scores_by_model):
            ms = scores_by_model[model_id]
            for layer in ms.layers:
                for ei, electrode_id in enumerate(electrode_ids):
                    lam = ms.lambda_grid[layer.lambda_idx[ei]]
                    for b in range(layer.scores.shape[1]):
                        for s, split in enumerate(SPLIT_NAMES):
                            yield [
                                model_id, layer.layer_id, electrode_id, b, split,
                                layer.scores[ei, b, s], lam,
                            ]

    write_csv(
        path,
        ["model", "layer", "electrode", "bin", "split", "r", "lambda"],
        rows(),
        config_hash,
    )


def write_ci_csv(path: str | Path, ci, electrode_ids: list[int], config_hash: str = "") -> None:
    def rows():
        for model_id in sorted(ci.mean):
            mean, lo, hi = ci.mean[model_id], ci.lower[model_id], ci.upper[model_id]
            for ei, electrode_id in enumerate(electrode_ids):
                for b in range(mean.shape[1]):
                    for s, split in enumerate(SPLIT_NAMES):
                        yield [
                            model_id, electrode_id, b, split,
                            mean[ei, b, s], lo[ei, b, s], hi[ei, b, s],
                        ]

    write_csv(
        path,
        ["model", "electrode", "bin", "split", "mean", "lower95", "upper95"],
        rows(),
        config_hash,
    )


def read_ci_csv(path: str | Path, electrode_ids: list[int], n_bins: int):
    from brainenc.bootstrap import BootstrapCI

    header, rows = read_csv(path)
    if header != ["model", "electrode", "bin", "split", "mean", "lower95", "upper95"]:
        raise DataError(f"{path}: unexpected CI columns {header}")
    order = {eid: i for i, eid in enumerate(electrode_ids)}
    split_of = {name: i for i, name in enumerate(SPLIT_NAMES)}
    mean: dict[str, np.ndarray] = {}
    lower: dict[str, np.ndarray] = {}
    upper: dict[str, np.ndarray] = {}
    for row in rows:
        model = row[0]
        if model not in mean:
            shape = (len(electrode_ids), n_bins, len(SPLIT_NAMES))
            mean[model] = np.full(shape, np.nan)
            lower[model] = np.full(shape, np.nan)
            upper[model] = np.full(shape, np.nan)
        ei = order[int(row[1])]
        b = int(row[2])
        s = split_of[row[3]]
        mean[model][ei, b, s] = float(row[4])
        lower[model][ei, b, s] = float(row[5])
        upper[model][ei, b, s] = float(row[6])
    for model, arr in mean.items():
        if np.isnan(arr).any() or np.isnan(lower[model]).any() or np.isnan(upper[model]).any():
            raise DataError(f"{path}: incomplete CI rows for model {model}")
    return BootstrapCI(mean=mean, lower=lower, upper=upper, n_resamples=0)


def write_survivors_csv(path: str | Path, mask, electrode_ids: list[int], config_hash: str = "") -> None:
    def rows():
        for model_id in sorted(mask.mask):
            m = mask.mask[model_id]
            for ei, electrode_id in enumerate(electrode_ids):
                for b in range(m.shape[1]):
                    yield [model_id, electrode_id, b, m[ei, b]]

    write_csv(path, ["model", "electrode", "bin", "survives"], rows(), config_hash)


def read_survivors_csv(path: str | Path, electrode_ids: list[int], n_bins: int):
    from brainenc.bootstrap import SurvivorMask

    header, rows = read_csv(path)
    if header != ["model", "electrode", "bin", "survives"]:
        raise DataError(f"{path}: unexpected survivor columns {header}")
    order = {eid: i for i, eid in enumerate(electrode_ids)}
    mask: dict[str, np.ndarray] = {}
    for row in rows:
        model = row[0]
        if model not in mask:
            mask[model] = np.zeros((len(electrode_ids), n_bins), dtype=bool)
        mask[model][order[int(row[1])], int(row[2])] = row[3] == "1"
    return SurvivorMask(mask=mask)


def write_verdicts_csv(
    path: str | Path,
    verdicts: list[ComparisonVerdict],
    electrodes: list[ElectrodeMeta],
    config_hash: str = "",
) -> None:
    meta = {e.electrode_id: e for e in electrodes}

    def rows():
        for v in verdicts:
            e = meta[v.electrode_id]
            yield [
                v.electrode_id, e.subject_id, e.region_label,
                v.winner, v.runner_up, v.diff, v.p_raw, v.p_adj, v.kind.value,
            ]

    write_csv(
        path,
        ["electrode", "subject", "region", "winner", "runner_up", "diff", "p_raw", "p_adj", "kind"],
        rows(),
        config_hash,
    )


def read_verdicts_csv(path: str | Path) -> list[ComparisonVerdict]:
    header, rows = read_csv(path)
    expected = ["electrode", "subject", "region", "winner", "runner_up", "diff", "p_raw", "p_adj", "kind"]
    if header != expected:
        raise DataError(f"{path}: unexpected verdict columns {header}")
    out = []
    for row in rows:
        out.append(
            ComparisonVerdict(
                electrode_id=int(row[0]),
                kind=VerdictKind(row[8]),
                winner=row[3] or None,
                runner_up=row[4] or None,
                diff=float(row[5]) if row[5] else None,
                p_raw=float(row[6]) if row[6] else None,
                p_adj=float(row[7]) if row[7] else None,
            )
        )
    return out
