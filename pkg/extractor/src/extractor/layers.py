"""Layer enumeration and activation capture via forward hooks.

A "layer" is any leaf submodule that produces a tensor during a forward pass:
individual attention key/query/value projections count separately, as do the
attention output projection and each MLP linear. Modules invoked more than
once per forward (shared weights) get one entry per call, suffixed with the
call index, so every distinct tensor operation is listed.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from extractor.errors import JobError


def _first_tensor(output) -> torch.Tensor | None:
    if isinstance(output, torch.Tensor):
        return output
    if isinstance(output, (tuple, list)):
        for item in output:
            tensor = _first_tensor(item)
            if tensor is not None:
                return tensor
    return None


@dataclass
class CapturedLayer:
    layer_id: str
    shape: tuple[int, ...]  # activation shape without the batch axis
    flat_dim: int


class ActivationCapture:
    """Registers hooks on all leaf modules and records their outputs.

    Use as a context manager around forward passes; `activations` maps
    layer_id to the flattened 1-D activation of the last pass.
    """

    def __init__(self, model: torch.nn.Module):
        self.model = model
        self._handles = []
        self.activations: dict[str, torch.Tensor] = {}
        self.shapes: dict[str, tuple[int, ...]] = {}
        self.order: list[str] = []
        self._calls: dict[str, int] = {}

    def __enter__(self) -> "ActivationCapture":
        for name, module in self.model.named_modules():
            if name == "" or any(module.children()):
                continue  # containers delegate to their leaves

            def hook(mod, args, output, name=name):
                tensor = _first_tensor(output)
                if tensor is None:
                    return
                calls = self._calls.get(name, 0)
                self._calls[name] = calls + 1
                layer_id = name if calls == 0 else f"{name}.call{calls}"
                flat = tensor.detach().reshape(-1)
                if layer_id not in self.shapes:
                    self.order.append(layer_id)
                    self.shapes[layer_id] = tuple(tensor.shape[1:]) or tuple(tensor.shape)
                self.activations[layer_id] = flat

            self._handles.append(module.register_forward_hook(hook))
        return self

    def reset_call_counts(self) -> None:
        """Call between events so repeated-module suffixes stay aligned."""
        self._calls.clear()
        self.activations.clear()

    def __exit__(self, *exc) -> None:
        for handle in self._handles:
            handle.remove()
        self._handles.clear()


def enumerate_layers(model: torch.nn.Module, probe_inputs: dict) -> list[CapturedLayer]:
    """List every tensor-producing leaf module, in call order.

    `probe_inputs` are keyword arguments for one representative forward pass.
    """
    model.eval()
    try:
        with ActivationCapture(model) as capture, torch.no_grad():
            model(**probe_inputs)
    except Exception as exc:
        raise JobError(f"model probe forward failed: {exc}") from exc
    if not capture.order:
        raise JobError("model produced no tensor outputs")
    return [
        CapturedLayer(
            layer_id=layer_id,
            shape=capture.shapes[layer_id],
            flat_dim=int(capture.activations[layer_id].numel()),
        )
        for layer_id in capture.order
    ]
