"""Bit-exact interchange format for attention tensors, masks and manifests.

Tensors travel as NPY v1.0 files (little-endian float32, C order).  Each
sample is one directory holding a JSON manifest plus the referenced tensor
files, an optional ground-truth mask PNG and an optional box JSON.  The
manifest field names are a versioned contract (``format_version: 1``).
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DataError,
    InvariantViolation,
    MalformedHeader,
    ManifestError,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedTensor,
)

_MAGIC = b"\x93NUMPY"
_SUPPORTED_NDIM = (2, 3, 4)
ALLOWED_RESOLUTIONS = (16, 32, 64)
ROW_SUM_TOL = 1e-4
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Tensor files


def write_tensor(t: np.ndarray, path: str | Path) -> None:
    """Write ``t`` as an NPY v1.0 file (float32, C order, little endian)."""
    arr = np.asarray(t)
    if arr.ndim not in _SUPPORTED_NDIM:
        raise UnsupportedTensor(f"unsupported rank {arr.ndim}, expected one of {_SUPPORTED_NDIM}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    shape = arr.shape
    shape_repr = "(" + ", ".join(str(s) for s in shape) + ("," if len(shape) == 1 else "") + ")"
    header = f"{{'descr': '<f4', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # pad so that magic + version + len + header is a multiple of 64
    unpadded = len(_MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - unpadded % 64) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(bytes([1, 0]))
        f.write(struct.pack("<H", len(header)))
        f.write(header.encode("latin1"))
        f.write(arr.tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an NPY v1.0 float32 tensor written by :func:`write_tensor`."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise MalformedHeader(f"{path}: bad magic {magic!r}")
        version = f.read(2)
        if len(version) < 2 or version[0] != 1:
            raise MalformedHeader(f"{path}: unsupported NPY version {version!r}")
        len_bytes = f.read(2)
        if len(len_bytes) < 2:
            raise TruncatedFile(f"{path}: truncated header length")
        (header_len,) = struct.unpack("<H", len_bytes)
        header_bytes = f.read(header_len)
        if len(header_bytes) < header_len:
            raise TruncatedFile(f"{path}: truncated header")
        try:
            header = ast.literal_eval(header_bytes.decode("latin1"))
        except (ValueError, SyntaxError) as exc:
            raise MalformedHeader(f"{path}: unparseable header") from exc
        if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
            raise MalformedHeader(f"{path}: unexpected header keys")
        if header["descr"] != "<f4" or header["fortran_order"]:
            raise UnsupportedTensor(f"{path}: dtype {header['descr']}, fortran={header['fortran_order']}")
        shape = tuple(header["shape"])
        if len(shape) not in _SUPPORTED_NDIM:
            raise UnsupportedTensor(f"{path}: unsupported rank {len(shape)}")
        n_bytes = int(np.prod(shape)) * 4
        payload = f.read(n_bytes)
        if len(payload) < n_bytes:
            raise TruncatedFile(f"{path}: expected {n_bytes} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class ScoreMap:
    """A 2D non-negative score map over the image grid."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 2:
            raise InvariantViolation(f"score map must be 2D, got shape {g.shape}")
        object.__setattr__(self, "grid", g)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def value_range(self) -> tuple[float, float]:
        return float(self.grid.min()), float(self.grid.max())

    def normalize(self) -> "ScoreMap":
        """Min-max normalize to [0, 1]; constant maps become all zeros."""
        lo, hi = self.grid.min(), self.grid.max()
        # Treat ulp-level spread (e.g. from resampling a constant map) as constant.
        if hi - lo <= 1e-12 * max(abs(hi), abs(lo), 1.0):
            return ScoreMap(np.zeros_like(self.grid))
        return ScoreMap((self.grid - lo) / (hi - lo))


@dataclass(frozen=True)
class AttentionTrace:
    """Raw per-step, per-head VLM attention rows plus the visual-token span."""

    weights: np.ndarray  # (T, H, N)
    visual_span: tuple[int, int]  # half-open token index range
    visual_grid: tuple[int, int]  # (h_v, w_v)

    def validate(self, sample_id: str | None = None) -> None:
        w = self.weights
        if w.ndim != 3:
            raise InvariantViolation(f"trace weights must be (T,H,N), got {w.shape}", sample_id=sample_id)
        p, p_prime = self.visual_span
        n = w.shape[2]
        if not (0 <= p < p_prime <= n):
            raise InvariantViolation(f"visual span ({p},{p_prime}) outside [0,{n}]", sample_id=sample_id)
        h_v, w_v = self.visual_grid
        if h_v * w_v != p_prime - p:
            raise InvariantViolation(
                f"visual grid {h_v}x{w_v} != span length {p_prime - p}", sample_id=sample_id
            )
        if w.size and w.min() < 0:
            raise InvariantViolation("negative attention", sample_id=sample_id)
        if w.size:
            row_sums = w.sum(axis=2)
            if row_sums.max() > 1 + ROW_SUM_TOL:
                raise InvariantViolation(
                    f"attention row sum {row_sums.max():.6f} exceeds 1 + {ROW_SUM_TOL}",
                    sample_id=sample_id,
                )


@dataclass(frozen=True)
class SelfAttentionStack:
    """Per-resolution pixel-to-pixel self-attention tensors (row stochastic)."""

    layers: tuple[tuple[int, np.ndarray], ...]  # (resolution, (r*r, r*r))

    @property
    def resolutions(self) -> tuple[int, ...]:
        return tuple(r for r, _ in self.layers)

    def validate(self, sample_id: str | None = None) -> None:
        if len(set(self.resolutions)) != len(self.layers):
            raise InvariantViolation("duplicate resolutions in self-attention stack", sample_id=sample_id)
        for res, tensor in self.layers:
            if tensor.shape != (res * res, res * res):
                raise InvariantViolation(
                    f"self-attention at r={res} has shape {tensor.shape}, expected {(res * res, res * res)}",
                    sample_id=sample_id,
                )
            if tensor.size and tensor.min() < 0:
                raise InvariantViolation(f"negative self-attention at r={res}", sample_id=sample_id)
            row_sums = tensor.sum(axis=1)
            err = np.abs(row_sums - 1.0).max()
            if err > ROW_SUM_TOL:
                raise InvariantViolation(
                    f"self-attention rows at r={res} deviate from stochasticity by {err:.6f}",
                    sample_id=sample_id,
                )


@dataclass(frozen=True)
class GroundTruth:
    mask: np.ndarray | None = None  # bool (H_px, W_px)
    box: tuple[int, int, int, int] | None = None  # (x1, y1, x2, y2), half-open


@dataclass(frozen=True)
class Manifest:
    sample_id: str
    image_size: tuple[int, int]  # (height_px, width_px)
    expression: str
    cross_trace_path: str
    visual_span: tuple[int, int]
    visual_grid: tuple[int, int]
    self_stack_paths: dict[int, str] = field(default_factory=dict)
    gt_mask_path: str | None = None
    gt_box_path: str | None = None


# ---------------------------------------------------------------------------
# Manifest + sample loading


def _require(d: dict, key: str, path: Path):
    if key not in d:
        raise ManifestError(f"{path}: missing field '{key}'")
    return d[key]


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    version = _require(raw, "format_version", path)
    if version != FORMAT_VERSION:
        raise ManifestError(f"{path}: unsupported format_version {version}")
    sample_id = _require(raw, "sample_id", path)
    stacks_raw = _require(raw, "self_stack_paths", path)
    stacks: dict[int, str] = {}
    for key, rel in stacks_raw.items():
        try:
            res = int(key)
        except ValueError:
            raise ManifestError(f"{path}: non-integer resolution key '{key}'", sample_id=sample_id)
        if res not in ALLOWED_RESOLUTIONS:
            raise ManifestError(
                f"{path}: unknown resolution {res}, allowed {ALLOWED_RESOLUTIONS}", sample_id=sample_id
            )
        stacks[res] = rel
    if not stacks:
        raise ManifestError(f"{path}: empty self_stack_paths", sample_id=sample_id)
    return Manifest(
        sample_id=sample_id,
        image_size=tuple(_require(raw, "image_size", path)),
        expression=_require(raw, "expression", path),
        cross_trace_path=_require(raw, "cross_trace_path", path),
        visual_span=tuple(_require(raw, "visual_span", path)),
        visual_grid=tuple(_require(raw, "visual_grid", path)),
        self_stack_paths=stacks,
        gt_mask_path=raw.get("gt_mask_path"),
        gt_box_path=raw.get("gt_box_path"),
    )


def read_mask_png(path: str | Path) -> np.ndarray:
    """Read a single-channel mask PNG; foreground is 255."""
    img = Image.open(path).convert("L")
    return np.asarray(img) >= 128


def write_mask_png(mask: np.ndarray, path: str | Path) -> None:
    img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def read_box_json(path: str | Path) -> tuple[int, int, int, int]:
    box = json.loads(Path(path).read_text())
    if not (isinstance(box, list) and len(box) == 4):
        raise ManifestError(f"{path}: box JSON must be [x1, y1, x2, y2]")
    return tuple(int(v) for v in box)


def write_box_json(box: tuple[int, int, int, int], path: str | Path) -> None:
    Path(path).write_text(json.dumps(list(box)))


def load_sample(manifest_path: str | Path) -> tuple[AttentionTrace, SelfAttentionStack, GroundTruth | None]:
    """Load and validate one sample directory via its manifest."""
    manifest_path = Path(manifest_path)
    m = read_manifest(manifest_path)
    root = manifest_path.parent
    sid = m.sample_id

    def _read(path: Path) -> np.ndarray:
        try:
            return read_tensor(path)
        except DataError as exc:
            if exc.sample_id is None:
                exc.sample_id = sid
            raise

    trace_file = root / m.cross_trace_path
    if not trace_file.exists():
        raise ManifestError(f"cross trace file missing: {trace_file}", sample_id=sid)
    weights = _read(trace_file)
    if weights.ndim != 3:
        raise ShapeMismatch(f"cross trace must be 3D, got {weights.shape}", sample_id=sid)
    trace = AttentionTrace(weights=weights, visual_span=m.visual_span, visual_grid=m.visual_grid)
    trace.validate(sample_id=sid)

    layers = []
    for res in sorted(m.self_stack_paths):
        stack_file = root / m.self_stack_paths[res]
        if not stack_file.exists():
            raise ManifestError(f"self-attention file missing: {stack_file}", sample_id=sid)
        tensor = _read(stack_file)
        if tensor.shape != (res * res, res * res):
            raise ShapeMismatch(
                f"self-attention at r={res} has shape {tensor.shape}, expected {(res * res, res * res)}",
                sample_id=sid,
            )
        layers.append((res, tensor))
    stack = SelfAttentionStack(layers=tuple(layers))
    stack.validate(sample_id=sid)

    gt = None
    mask = box = None
    if m.gt_mask_path is not None:
        mask_file = root / m.gt_mask_path
        if mask_file.exists():
            mask = read_mask_png(mask_file)
            if mask.shape != tuple(m.image_size):
                raise ShapeMismatch(
                    f"gt mask shape {mask.shape} != image_size {m.image_size}", sample_id=sid
                )
    if m.gt_box_path is not None:
        box_file = root / m.gt_box_path
        if box_file.exists():
            box = read_box_json(box_file)
    if mask is not None or box is not None:
        gt = GroundTruth(mask=mask, box=box)
    return trace, stack, gt


def write_manifest(m: Manifest, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "sample_id": m.sample_id,
        "image_size": list(m.image_size),
        "expression": m.expression,
        "cross_trace_path": m.cross_trace_path,
        "visual_span": list(m.visual_span),
        "visual_grid": list(m.visual_grid),
        "self_stack_paths": {str(r): p for r, p in sorted(m.self_stack_paths.items())},
    }
    if m.gt_mask_path is not None:
        doc["gt_mask_path"] = m.gt_mask_path
    if m.gt_box_path is not None:
        doc["gt_box_path"] = m.gt_box_path
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
