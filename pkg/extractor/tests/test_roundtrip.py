"""Acceptance: extractor output interoperates with the engine, bit for bit.

A toy transformer's NFEA files must parse in the engine with n and D matching
the enumerated layer shapes, regeneration must be byte-identical, and the
extracted battery must flow through the engine's loading and regression path.
"""

import numpy as np

from brainenc.encoder import RidgeConfig
from brainenc.events import Alignment, ElectrodeMeta, ResponseTensor
from brainenc.formats import read_manifest, read_nfea, write_nrsp
from brainenc.pipeline import encode_alignment, load_alignment

from extractor.adapters import get_adapter
from extractor.frames import SyntheticFrameSource
from extractor.jobs import ExtractionJob, extract
from extractor.layers import enumerate_layers


def report(name, ok, detail):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


class TestExtractorRoundTrip:
    def test_nfea_parse_dims_and_bit_identity(self, language_events, tmp_path):
        events_path, events = language_events
        adapter = get_adapter("toy_text_contrastive")
        expected = {
            l.layer_id: l.flat_dim
            for l in enumerate_layers(adapter.build(seed=7), adapter.probe_inputs())
        }
        job = ExtractionJob(
            model_key="toy_text_contrastive", trained=True,
            events_path=events_path, output_dir=tmp_path / "a", seed=7,
        )
        result = extract(job, SyntheticFrameSource())

        dims_ok = True
        for layer_id in result.layer_ids:
            ff = read_nfea(result.feature_paths[layer_id])
            dims_ok &= ff.F.shape == (len(events), expected[layer_id])
            dims_ok &= (ff.model_id, ff.layer_id) == ("toy_text_contrastive", layer_id)

        job_b = ExtractionJob(
            model_key="toy_text_contrastive", trained=True,
            events_path=events_path, output_dir=tmp_path / "b", seed=7,
        )
        result_b = extract(job_b, SyntheticFrameSource())
        identical = all(
            result.feature_paths[l].read_bytes() == result_b.feature_paths[l].read_bytes()
            for l in result.layer_ids
        )
        report(
            "extractor-round-trip",
            dims_ok and identical,
            f"{len(result.layer_ids)} layers parsed with matching dims; "
            f"regeneration bit-identical={identical}",
        )

    def test_extracted_battery_runs_through_engine(self, language_events, tmp_path):
        events_path, events = language_events
        outdir = tmp_path / "battery"
        for model in ("toy_text_unimodal", "toy_cross_attention"):
            extract(
                ExtractionJob(
                    model_key=model, trained=True, events_path=events_path,
                    output_dir=outdir, seed=7,
                    layer_filter=None,
                ),
                SyntheticFrameSource(),
            )
        # synthetic response tensor over the same events
        rng = np.random.default_rng(0)
        responses = ResponseTensor(
            electrodes=(ElectrodeMeta(0, 1, "insula"), ElectrodeMeta(1, 1, "cuneus")),
            values=rng.standard_normal((2, len(events), 3)),
            bin_centers_ms=np.array([-25.0, 0.0, 25.0]),
        )
        write_nrsp(outdir / "responses.nrsp", responses)

        ds, specs = load_alignment(
            Alignment.LANGUAGE,
            events_path,
            outdir / "responses.nrsp",
            outdir / "manifest.json",
            epsilon=0.5,
            seed=7,
        )
        manifest = read_manifest(outdir / "manifest.json")
        scores = encode_alignment(
            ds, RidgeConfig(lambda_grid=(1.0, 10.0), k_folds=1), threads=1
        )
        ok = (
            set(scores.models) == {"toy_text_unimodal", "toy_cross_attention"}
            and all(
                len(scores.models[m].layer_ids)
                == len([e for e in manifest if e.model_id == m])
                for m in scores.models
            )
        )
        report(
            "extractor-engine-integration",
            ok,
            f"{len(manifest)} manifest entries regressed through the engine",
        )
