"""Event structures and conversion of raw signals to binned mean activity.

An event structure is one image-text pair with an onset time; a dataset is a
sequence of events sharing one alignment (word-onset anchored or scene-cut
anchored). Raw per-electrode recordings are windowed around each onset and
averaged over sliding sub-windows, producing the regression targets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from brainenc.errors import ConfigurationError, DataError


class Alignment(enum.Enum):
    """Which modality anchors event extraction."""

    LANGUAGE = "language"
    VISION = "vision"


@dataclass(frozen=True)
class EventStructure:
    """One image-text pair; the unit of resampling."""

    event_id: int
    onset_ms: float
    text: str
    image_ref: str
    alignment: Alignment


@dataclass(frozen=True)
class ElectrodeMeta:
    electrode_id: int
    subject_id: int
    region_label: str
    coordinates: tuple[float, float, float] | None = None


@dataclass
class RawSignal:
    """A single electrode's recording at a fixed sample rate."""

    electrode_id: int
    samples: np.ndarray
    sample_rate_hz: float = 2000.0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DataError(f"signal for electrode {self.electrode_id} must be 1-D")
        if self.sample_rate_hz <= 0:
            raise DataError("sample_rate_hz must be positive")


@dataclass(frozen=True)
class WindowSpec:
    """Peri-event windowing: a window centered on onset, split into sliding
    sub-windows whose means become the per-bin targets."""

    window_ms: float = 4000.0
    sub_window_ms: float = 200.0
    stride_ms: float = 25.0

    def validate(self, sample_rate_hz: float | None = None) -> None:
        if self.window_ms <= 0 or self.sub_window_ms <= 0 or self.stride_ms <= 0:
            raise ConfigurationError("window parameters must be positive")
        if self.sub_window_ms > self.window_ms:
            raise ConfigurationError("sub_window_ms must not exceed window_ms")
        if sample_rate_hz is None:
            return
        period_ms = 1000.0 / sample_rate_hz
        for name, value in (
            ("window_ms", self.window_ms),
            ("sub_window_ms", self.sub_window_ms),
            ("stride_ms", self.stride_ms),
        ):
            if abs(value / period_ms - round(value / period_ms)) > 1e-9:
                raise ConfigurationError(
                    f"{name}={value} is not divisible by the sample period {period_ms} ms"
                )

    def bin_centers_ms(self) -> np.ndarray:
        """Bin centers relative to onset; consecutive centers differ by stride_ms."""
        n = bin_count(self)
        starts = -self.window_ms / 2.0 + self.stride_ms * np.arange(n)
        return starts + self.sub_window_ms / 2.0


def bin_count(spec: WindowSpec) -> int:
    """Number of sub-windows: floor((window - sub_window) / stride) + 1."""
    spec.validate()
    return int(math.floor((spec.window_ms - spec.sub_window_ms) / spec.stride_ms + 1e-9)) + 1


@dataclass
class ResponseTensor:
    """Mean activity per (electrode, event, time bin), with electrode metadata."""

    electrodes: tuple[ElectrodeMeta, ...]
    values: np.ndarray  # float64 [n_electrodes, n_events, n_bins]
    bin_centers_ms: np.ndarray
    event_ids: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.bin_centers_ms = np.asarray(self.bin_centers_ms, dtype=np.float64)
        if self.values.ndim != 3:
            raise DataError("response values must be [electrodes, events, bins]")
        if self.values.shape[0] != len(self.electrodes):
            raise DataError("electrode count mismatch between metadata and values")
        if self.values.shape[2] != self.bin_centers_ms.shape[0]:
            raise DataError("bin count mismatch between values and bin_centers")
        if self.event_ids and len(self.event_ids) != self.values.shape[1]:
            raise DataError("event_ids length does not match event axis")

    @property
    def n_electrodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_events(self) -> int:
        return self.values.shape[1]

    @property
    def n_bins(self) -> int:
        return self.values.shape[2]

    def electrode_ids(self) -> list[int]:
        return [e.electrode_id for e in self.electrodes]


@dataclass
class ElectrodeExtraction:
    """extract_response output for one electrode."""

    electrode_id: int
    values: np.ndarray  # [n_kept_events, n_bins]
    kept_event_ids: list[int]
    dropped: list[tuple[int, str]]  # (event_id, reason)


def _sub_window_starts(
    onsets_ms: np.ndarray, spec: WindowSpec, sample_rate_hz: float
) -> tuple[np.ndarray, int, int, int]:
    """First-sample index of each event window plus per-window sample counts."""
    spm = sample_rate_hz / 1000.0
    window_samps = int(round(spec.window_ms * spm))
    sub_samps = int(round(spec.sub_window_ms * spm))
    stride_samps = int(round(spec.stride_ms * spm))
    base = (onsets_ms - spec.window_ms / 2.0) * spm
    # Half-open sub-windows [start, start + sub): first sample at ceil(start),
    # with a tolerance absorbing float error from the ms -> sample conversion.
    starts = np.ceil(base - 1e-9).astype(np.int64)
    return starts, window_samps, sub_samps, stride_samps


def extract_response(
    signal: RawSignal,
    events: list[EventStructure],
    spec: WindowSpec,
) -> ElectrodeExtraction:
    """Average raw samples over each event's sliding sub-windows.

    Events whose window extends past either end of the recording are dropped
    with a reason, never zero-filled.
    """
    spec.validate(signal.sample_rate_hz)
    n_bins = bin_count(spec)
    onsets = np.array([ev.onset_ms for ev in events], dtype=np.float64)
    starts, window_samps, sub_samps, stride_samps = _sub_window_starts(
        onsets, spec, signal.sample_rate_hz
    )

    n_samples = signal.samples.shape[0]
    keep = (starts >= 0) & (starts + window_samps <= n_samples)
    dropped = [
        (events[i].event_id, "window outside recording bounds")
        for i in np.flatnonzero(~keep)
    ]
    kept_idx = np.flatnonzero(keep)
    values = np.empty((kept_idx.size, n_bins), dtype=np.float64)
    kept_starts = starts[kept_idx]
    offsets = np.arange(sub_samps, dtype=np.int64)
    for b in range(n_bins):
        first = kept_starts + b * stride_samps
        values[:, b] = signal.samples[first[:, None] + offsets[None, :]].mean(axis=1)
    return ElectrodeExtraction(
        electrode_id=signal.electrode_id,
        values=values,
        kept_event_ids=[events[i].event_id for i in kept_idx],
        dropped=dropped,
    )


def build_response_tensor(
    signals: list[RawSignal],
    electrodes: list[ElectrodeMeta],
    events: list[EventStructure],
    spec: WindowSpec,
) -> tuple[ResponseTensor, list[tuple[int, str]]]:
    """Assemble the full tensor; an event is dropped if any electrode rejects it.

    Signals are matched to electrode metadata by electrode_id; output order
    follows the metadata list, so assembly is order-deterministic.
    """
    by_id = {s.electrode_id: s for s in signals}
    missing = [e.electrode_id for e in electrodes if e.electrode_id not in by_id]
    if missing:
        raise DataError(f"no raw signal for electrodes {missing}")

    extractions = [extract_response(by_id[e.electrode_id], events, spec) for e in electrodes]
    kept_ids = set(extractions[0].kept_event_ids) if extractions else set()
    for ex in extractions[1:]:
        kept_ids &= set(ex.kept_event_ids)
    dropped: dict[int, str] = {}
    for ex in extractions:
        for ev_id, reason in ex.dropped:
            dropped.setdefault(ev_id, reason)
    ordered_kept = [ev.event_id for ev in events if ev.event_id in kept_ids]

    n_bins = bin_count(spec)
    values = np.empty((len(electrodes), len(ordered_kept), n_bins), dtype=np.float64)
    for i, ex in enumerate(extractions):
        pos = {ev_id: j for j, ev_id in enumerate(ex.kept_event_ids)}
        rows = [pos[ev_id] for ev_id in ordered_kept]
        values[i] = ex.values[rows]
    tensor = ResponseTensor(
        electrodes=tuple(electrodes),
        values=values,
        bin_centers_ms=spec.bin_centers_ms(),
        event_ids=tuple(ordered_kept),
    )
    return tensor, sorted(dropped.items())


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [{"code": v.code, "message": v.message} for v in self.violations],
        }


def validate_dataset(
    events: list[EventStructure],
    responses: ResponseTensor,
    spec: WindowSpec | None = None,
) -> ValidationReport:
    """Structural checks on one alignment dataset. Reporting only, never raises."""
    violations: list[Violation] = []

    onsets = [ev.onset_ms for ev in events]
    ids = [ev.event_id for ev in events]
    if any(o < 0 for o in onsets):
        violations.append(Violation("negative onset", "event onset_ms < 0"))
    if any(b < a for a, b in zip(onsets, onsets[1:])):
        violations.append(Violation("non-monotone onsets", "events out of onset order"))
    if any(b <= a for a, b in zip(ids, ids[1:])):
        violations.append(Violation("non-increasing event ids", "event_id not strictly increasing"))
    alignments = {ev.alignment for ev in events}
    if len(alignments) > 1:
        violations.append(Violation("mixed alignment", "dataset mixes alignments"))

    seen: set[tuple[int, int]] = set()
    for e in responses.electrodes:
        key = (e.subject_id, e.electrode_id)
        if key in seen:
            violations.append(
                Violation("duplicate electrode", f"electrode {e.electrode_id} repeated for subject {e.subject_id}")
            )
        seen.add(key)

    if responses.n_events != len(events):
        violations.append(
            Violation(
                "event count mismatch",
                f"{responses.n_events} response events vs {len(events)} listed events",
            )
        )
    if spec is not None and responses.n_bins != bin_count(spec):
        violations.append(
            Violation(
                "bin count mismatch",
                f"{responses.n_bins} bins vs {bin_count(spec)} from window spec",
            )
        )
    if not np.isfinite(responses.values).all():
        violations.append(Violation("missing values", "response tensor contains NaN or inf"))

    return ValidationReport(violations)
