"""Model adapters: how each wrapped network consumes an event structure.

An adapter owns the model construction (seeded random init or a weights
file), the mapping from an event's text/frame to forward inputs, and the
modality bookkeeping the manifest needs. A randomly initialized contrastive
model loses the training signal that made it multimodal, so its manifest
entry is relabeled to the unimodal class of its input modality;
architecturally multimodal models keep their class regardless of weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import torch

from brainenc.comparison import ModalityClass

from extractor import toy
from extractor.errors import JobError


class Modality(enum.Enum):
    TEXT = "text"
    IMAGE = "image"
    IMAGE_TEXT = "image_text"


@dataclass
class EventAssets:
    text: str
    image: np.ndarray | None


class MissingAsset(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class AdapterInfo:
    model_id: str
    modality: Modality
    contrastive: bool
    base_class: ModalityClass


class ModelAdapter:
    """Base adapter; subclasses define the model and the input mapping."""

    info: AdapterInfo

    def build(self, seed: int, weights_path: str | None = None) -> torch.nn.Module:
        model = self._construct(seed)
        if weights_path is not None:
            try:
                state = torch.load(weights_path, map_location="cpu", weights_only=True)
                model.load_state_dict(state)
            except Exception as exc:
                raise JobError(f"cannot load weights from {weights_path}: {exc}") from exc
        model.eval()
        return model

    def _construct(self, seed: int) -> torch.nn.Module:
        raise NotImplementedError

    def inputs(self, assets: EventAssets) -> tuple[dict[str, torch.Tensor], bool]:
        """Forward kwargs for one event plus a truncation flag."""
        raise NotImplementedError

    def probe_inputs(self) -> dict[str, torch.Tensor]:
        """Representative inputs for layer enumeration."""
        kwargs, _ = self.inputs(self._probe_assets())
        return kwargs

    def _probe_assets(self) -> EventAssets:
        return EventAssets(
            text="probe sentence for layer enumeration",
            image=np.zeros((toy.IMAGE_SIZE, toy.IMAGE_SIZE), dtype=np.float32),
        )

    # -- shared input builders ---------------------------------------------

    def _text_inputs(self, assets: EventAssets) -> tuple[torch.Tensor, bool]:
        if not assets.text or not assets.text.strip():
            raise MissingAsset("missing text")
        return toy.tokenize(assets.text)

    def _image_inputs(self, assets: EventAssets) -> torch.Tensor:
        if assets.image is None:
            raise MissingAsset("missing frame")
        image = np.asarray(assets.image, dtype=np.float32)
        if image.shape != (toy.IMAGE_SIZE, toy.IMAGE_SIZE):
            raise MissingAsset(f"bad frame shape {image.shape}")
        return torch.from_numpy(image).reshape(1, 1, *image.shape)

    def effective_class(self, trained: bool) -> ModalityClass:
        """Manifest class after the random-initialization rule."""
        if trained or not self.info.contrastive:
            return self.info.base_class
        if self.info.base_class is ModalityClass.MULTIMODAL_TRAINED:
            if self.info.modality is Modality.TEXT:
                return ModalityClass.UNIMODAL_LANGUAGE
            return ModalityClass.UNIMODAL_VISION
        return self.info.base_class


class ToyTextContrastive(ModelAdapter):
    """Text tower of a contrastively trained image-text model."""

    def __init__(self, model_id: str = "toy_text_contrastive"):
        self.info = AdapterInfo(
            model_id, Modality.TEXT, contrastive=True,
            base_class=ModalityClass.MULTIMODAL_TRAINED,
        )

    def _construct(self, seed):
        return toy.seeded(toy.ToyTextEncoder, seed)

    def inputs(self, assets):
        tokens, truncated = self._text_inputs(assets)
        return {"tokens": tokens}, truncated


class ToyImageContrastive(ModelAdapter):
    """Vision tower of a contrastively trained image-text model."""

    def __init__(self, model_id: str = "toy_image_contrastive"):
        self.info = AdapterInfo(
            model_id, Modality.IMAGE, contrastive=True,
            base_class=ModalityClass.MULTIMODAL_TRAINED,
        )

    def _construct(self, seed):
        return toy.seeded(toy.ToyImageEncoder, seed)

    def inputs(self, assets):
        return {"image": self._image_inputs(assets)}, False


class ToyTextUnimodal(ModelAdapter):
    def __init__(self, model_id: str = "toy_text_unimodal"):
        self.info = AdapterInfo(
            model_id, Modality.TEXT, contrastive=False,
            base_class=ModalityClass.UNIMODAL_LANGUAGE,
        )

    def _construct(self, seed):
        return toy.seeded(toy.ToyTextEncoder, seed)

    def inputs(self, assets):
        tokens, truncated = self._text_inputs(assets)
        return {"tokens": tokens}, truncated


class ToyImageUnimodal(ModelAdapter):
    def __init__(self, model_id: str = "toy_image_unimodal"):
        self.info = AdapterInfo(
            model_id, Modality.IMAGE, contrastive=False,
            base_class=ModalityClass.UNIMODAL_VISION,
        )

    def _construct(self, seed):
        return toy.seeded(toy.ToyImageEncoder, seed)

    def inputs(self, assets):
        return {"image": self._image_inputs(assets)}, False


class ToyCrossAttention(ModelAdapter):
    """Architecturally multimodal: stays multimodal even with random weights."""

    def __init__(self, model_id: str = "toy_cross_attention"):
        self.info = AdapterInfo(
            model_id, Modality.IMAGE_TEXT, contrastive=False,
            base_class=ModalityClass.MULTIMODAL_ARCH,
        )

    def _construct(self, seed):
        return toy.seeded(toy.ToyCrossAttention, seed)

    def inputs(self, assets):
        tokens, truncated = self._text_inputs(assets)
        return {"tokens": tokens, "image": self._image_inputs(assets)}, truncated


class ToySingleLinear(ModelAdapter):
    """One-layer model: hashes words into a fixed bag-of-words vector."""

    DIM = 8

    def __init__(self, model_id: str = "toy_linear"):
        self.info = AdapterInfo(
            model_id, Modality.TEXT, contrastive=False,
            base_class=ModalityClass.UNIMODAL_LANGUAGE,
        )

    def _construct(self, seed):
        return toy.seeded(toy.SingleLinear, seed, dim_in=self.DIM)

    def inputs(self, assets):
        tokens, truncated = self._text_inputs(assets)
        bag = torch.zeros(1, self.DIM)
        for t in tokens.flatten().tolist():
            if t:
                bag[0, t % self.DIM] += 1.0
        return {"x": bag}, truncated


REGISTRY: dict[str, type[ModelAdapter]] = {
    "toy_text_contrastive": ToyTextContrastive,
    "toy_image_contrastive": ToyImageContrastive,
    "toy_text_unimodal": ToyTextUnimodal,
    "toy_image_unimodal": ToyImageUnimodal,
    "toy_cross_attention": ToyCrossAttention,
    "toy_linear": ToySingleLinear,
}


def get_adapter(name: str) -> ModelAdapter:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise JobError(
            f"unknown model {name!r}; available: {sorted(REGISTRY)}"
        ) from None
