import numpy as np
import pytest

from brainenc.errors import ConfigurationError
from brainenc.events import (
    Alignment,
    ElectrodeMeta,
    EventStructure,
    RawSignal,
    ResponseTensor,
    WindowSpec,
    bin_count,
    build_response_tensor,
    extract_response,
    validate_dataset,
)


def make_events(onsets, alignment=Alignment.LANGUAGE):
    return [
        EventStructure(i, float(t), f"w{i}", f"f{i}", alignment)
        for i, t in enumerate(onsets)
    ]


class TestBinCount:
    def test_defaults(self):
        # floor((4000 - 200) / 25) + 1
        assert bin_count(WindowSpec(4000, 200, 25)) == 153

    def test_single_window(self):
        assert bin_count(WindowSpec(200, 200, 25)) == 1

    def test_floor(self):
        assert bin_count(WindowSpec(400, 200, 100)) == 3

    def test_invalid_spec(self):
        with pytest.raises(ConfigurationError):
            bin_count(WindowSpec(100, 200, 25))
        with pytest.raises(ConfigurationError):
            bin_count(WindowSpec(400, 200, 0))

    def test_sample_period_divisibility(self):
        WindowSpec(4000, 200, 25).validate(2000.0)
        with pytest.raises(ConfigurationError):
            WindowSpec(4000, 200, 25.3).validate(2000.0)

    def test_bin_centers_spacing(self):
        spec = WindowSpec(4000, 200, 25)
        centers = spec.bin_centers_ms()
        assert centers.shape == (153,)
        assert np.allclose(np.diff(centers), 25.0)
        assert centers[0] == -1900.0


class TestExtractResponse:
    def test_constant_signal(self):
        signal = RawSignal(0, np.full(16000, 3.25))
        events = make_events([2000.0, 4000.0])
        ex = extract_response(signal, events, WindowSpec())
        assert ex.values.shape == (2, 153)
        assert np.all(ex.values == 3.25)

    def test_ramp_first_bin(self):
        # Sample-index signal at 2 kHz: window starts at t=0, so the first
        # 200 ms sub-window covers samples 0..399.
        signal = RawSignal(0, np.arange(16000, dtype=np.float64))
        events = make_events([2000.0])
        ex = extract_response(signal, events, WindowSpec())
        assert ex.values[0, 0] == pytest.approx(199.5, abs=1e-12)

    def test_window_spans_8000_samples(self):
        # Event placed so its window exactly reaches the end of the recording:
        # onset 2000 ms consumes samples [0, 8000).
        signal = RawSignal(0, np.arange(8000, dtype=np.float64))
        events = make_events([2000.0])
        ex = extract_response(signal, events, WindowSpec())
        assert ex.kept_event_ids == [0]
        # last bin covers samples 7600..7999
        assert ex.values[0, -1] == pytest.approx(np.arange(7600, 8000).mean())

    def test_out_of_bounds_dropped_not_padded(self):
        signal = RawSignal(0, np.zeros(8000))
        events = make_events([1999.5, 2000.0, 2000.5])
        ex = extract_response(signal, events, WindowSpec())
        assert ex.kept_event_ids == [1]
        assert [e for e, _ in ex.dropped] == [0, 2]
        assert all("bounds" in reason for _, reason in ex.dropped)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        base = rng.standard_normal(12000)
        events = make_events([2100.0, 2500.0, 3700.0])
        spec = WindowSpec(400, 200, 50)
        a, b = 2.5, -1.25
        out1 = extract_response(RawSignal(0, a * base + b), events, spec)
        out0 = extract_response(RawSignal(0, base), events, spec)
        assert np.allclose(out1.values, a * out0.values + b, atol=1e-12)

    def test_determinism(self):
        rng = np.random.default_rng(1)
        sig = rng.standard_normal(10000)
        events = make_events([2000.0, 3000.0])
        a = extract_response(RawSignal(0, sig.copy()), events, WindowSpec())
        b = extract_response(RawSignal(0, sig.copy()), events, WindowSpec())
        assert np.array_equal(a.values, b.values)


class TestBuildResponseTensor:
    def test_event_dropped_for_all_when_any_rejects(self):
        events = make_events([2000.0, 4000.0, 7000.0])
        electrodes = [ElectrodeMeta(0, 1, "insula"), ElectrodeMeta(1, 1, "cuneus")]
        signals = [
            RawSignal(0, np.zeros(20000)),
            RawSignal(1, np.zeros(12000)),  # too short for the 7000 ms event
        ]
        tensor, dropped = build_response_tensor(signals, electrodes, events, WindowSpec())
        assert tensor.n_events == 2
        assert tensor.event_ids == (0, 1)
        assert dropped == [(2, "window outside recording bounds")]


class TestValidateDataset:
    def _tensor(self, n_events=3, n_electrodes=2, n_bins=4):
        electrodes = tuple(ElectrodeMeta(i, 1, "insula") for i in range(n_electrodes))
        return ResponseTensor(
            electrodes=electrodes,
            values=np.zeros((n_electrodes, n_events, n_bins)),
            bin_centers_ms=np.arange(n_bins, dtype=float),
        )

    def test_well_formed(self):
        report = validate_dataset(make_events([1.0, 2.0, 3.0]), self._tensor())
        assert report.passed
        assert report.violations == []

    def test_duplicate_electrode(self):
        electrodes = (ElectrodeMeta(5, 1, "insula"), ElectrodeMeta(5, 1, "cuneus"))
        tensor = ResponseTensor(
            electrodes=electrodes,
            values=np.zeros((2, 3, 4)),
            bin_centers_ms=np.arange(4.0),
        )
        report = validate_dataset(make_events([1.0, 2.0, 3.0]), tensor)
        assert any(v.code == "duplicate electrode" for v in report.violations)

    def test_non_monotone_onsets(self):
        report = validate_dataset(make_events([3.0, 2.0, 5.0]), self._tensor())
        assert any(v.code == "non-monotone onsets" for v in report.violations)

    def test_mixed_alignment(self):
        events = make_events([1.0, 2.0]) + [
            EventStructure(2, 3.0, "w", "f", Alignment.VISION)
        ]
        report = validate_dataset(events, self._tensor())
        assert any(v.code == "mixed alignment" for v in report.violations)

    def test_nan_flagged(self):
        tensor = self._tensor()
        tensor.values[0, 0, 0] = np.nan
        report = validate_dataset(make_events([1.0, 2.0, 3.0]), tensor)
        assert any(v.code == "missing values" for v in report.violations)
