"""Synthetic attention fixtures with analytically known ground truth.

A fixture mimics the failure/success modes the real extractors exhibit:
the cross-attention concentrates on blob boundaries plus scattered
distractor activations, while the self-attention is block structured
(pixels inside a blob attend uniformly within it, background pixels attend
uniformly within the background). Generation is a pure function of the
spec and its seed, and the emitted sample directories are indistinguishable
from extractor output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attnio
from .attnio import AttentionTrace, Manifest, ScoreMap, SelfAttentionStack
from .errors import FixtureSpecError
from .evolve import BinaryMask, upsample_mask
from .grounding import BBox, BoxMode, mask_to_box

_PREFIX_TOKENS = 4
_SUFFIX_TOKENS = 8
_VISUAL_MASS = 0.85


@dataclass(frozen=True)
class BlobSpec:
    """A disk object in normalized [0,1]^2 coordinates (cy, cx)."""

    center: tuple[float, float]
    radius: float
    peak: float = 1.0


@dataclass(frozen=True)
class DistractorSpec:
    """A small spurious object: scattered cross-attention activation with
    its own structural self-attention block, away from every blob."""

    center: tuple[float, float]
    amplitude: float = 0.3
    radius: float = 0.025


@dataclass(frozen=True)
class FixtureSpec:
    blobs: tuple[BlobSpec, ...]
    distractors: tuple[DistractorSpec, ...] = ()
    grid: int = 64  # map resolution of the ground truth
    cross_grid: int = 16  # visual-token grid of the synthetic trace
    resolutions: tuple[int, ...] = (32, 64)
    noise_level: float = 0.05
    seed: int = 0
    image_scale: int = 4  # image_size = grid * image_scale


@dataclass(frozen=True)
class Fixture:
    spec: FixtureSpec
    trace: AttentionTrace
    stack: SelfAttentionStack
    gt_mask: BinaryMask  # at map resolution (spec.grid)
    gt_mask_image: BinaryMask  # nearest-upsampled to image resolution
    gt_box: BBox  # image space


def _membership(blob: BlobSpec, n: int, conservative: bool = False) -> np.ndarray:
    """Disk rasterization at an n x n grid.

    Conservative mode requires the whole pixel cell inside the disk; used
    for low-resolution self-attention layers so that bilinear upsampling
    bleed stays inside the full-resolution disk.
    """
    cy, cx = blob.center
    yy = (np.arange(n) + 0.5) / n
    xx = (np.arange(n) + 0.5) / n
    dist = np.hypot((yy - cy)[:, None], (xx - cx)[None, :])
    radius = blob.radius - (np.sqrt(2.0) / (2.0 * n) if conservative else 0.0)
    return dist <= radius


def _pixel(center: tuple[float, float], n: int) -> tuple[int, int]:
    cy, cx = center
    return min(n - 1, max(0, int(cy * n))), min(n - 1, max(0, int(cx * n)))


def _distractor_membership(d: DistractorSpec, n: int) -> np.ndarray:
    """Distractor pixels at an n x n grid; never empty (center fallback)."""
    member = _membership(BlobSpec(center=d.center, radius=d.radius), n)
    if not member.any():
        member[_pixel(d.center, n)] = True
    return member


def _chebyshev_gap_ok(member: np.ndarray, pix: tuple[int, int], gap: int) -> bool:
    """True iff pix is at Chebyshev distance >= gap from every member pixel."""
    rows, cols = np.nonzero(member)
    if rows.size == 0:
        return True
    d = np.maximum(np.abs(rows - pix[0]), np.abs(cols - pix[1]))
    return int(d.min()) >= gap


def validate_spec(spec: FixtureSpec) -> None:
    if not spec.blobs:
        raise FixtureSpecError("fixture needs at least one blob")
    for n in (spec.cross_grid, spec.grid, *spec.resolutions):
        members = [_membership(b, n) for b in spec.blobs]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if np.any(members[i] & members[j]):
                    raise FixtureSpecError(f"blobs {i} and {j} overlap at resolution {n}")
        # distractors must be DFS-isolated from every blob (2-pixel gap)
        # and disjoint from each other
        spurious = [_distractor_membership(d, n) for d in spec.distractors]
        for k, sp in enumerate(spurious):
            pixels = list(zip(*np.nonzero(sp)))
            for i, m in enumerate(members):
                for pix in pixels:
                    if not _chebyshev_gap_ok(m, pix, 2):
                        raise FixtureSpecError(
                            f"distractor {k} within 2 pixels of blob {i} at resolution {n}"
                        )
            for j in range(k + 1, len(spurious)):
                if np.any(sp & spurious[j]):
                    raise FixtureSpecError(f"distractors {k} and {j} overlap at resolution {n}")


def _boundary(member: np.ndarray) -> np.ndarray:
    """Member pixels with a 4-neighbor outside the member set (or the edge)."""
    padded = np.pad(member, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return member & ~interior


def _cross_base(spec: FixtureSpec, rng: np.random.Generator) -> np.ndarray:
    """Boundary-peaked cross-attention map on the cross grid, pre-normalization."""
    n = spec.cross_grid
    base = np.zeros((n, n))
    for blob in spec.blobs:
        member = _membership(blob, n)
        if not member.any():
            member[_pixel(blob.center, n)] = True
        edge = _boundary(member)
        base[edge] += blob.peak * (0.8 + 0.4 * rng.random(int(edge.sum())))
        base[member & ~edge] += 0.15 * blob.peak
    for d in spec.distractors:
        base[_distractor_membership(d, n)] += d.amplitude
    if spec.noise_level > 0:
        base += rng.uniform(0.0, spec.noise_level, size=base.shape)
    return base


def _block_self_attention(spec: FixtureSpec, n: int) -> np.ndarray:
    """Row-stochastic matrix: uniform attention within each blob / background."""
    conservative = n < spec.grid
    members = [_membership(b, n, conservative) for b in spec.blobs]
    spurious = [_distractor_membership(d, n) for d in spec.distractors]
    background = ~np.logical_or.reduce(members + spurious + [np.zeros((n, n), dtype=bool)])
    s = np.zeros((n * n, n * n))
    for region in (*members, *spurious, background):
        idx = np.flatnonzero(region.ravel())
        if idx.size:
            s[np.ix_(idx, idx)] = 1.0 / idx.size
    return s


def make_fixture(spec: FixtureSpec) -> Fixture:
    """Generate one deterministic fixture from its spec."""
    validate_spec(spec)
    rng = np.random.default_rng(spec.seed)

    base = _cross_base(spec, rng)
    n_vis = spec.cross_grid * spec.cross_grid
    n_tokens = _PREFIX_TOKENS + n_vis + _SUFFIX_TOKENS
    t_steps, heads = 3, 4
    weights = np.zeros((t_steps, heads, n_tokens))
    flat = base.ravel()
    for t in range(t_steps):
        for h in range(heads):
            scale = _VISUAL_MASS * (0.8 + 0.2 * rng.random())
            visual = flat / flat.sum() * scale
            text_share = (1.0 - visual.sum()) / (_PREFIX_TOKENS + _SUFFIX_TOKENS)
            weights[t, h, :_PREFIX_TOKENS] = text_share
            weights[t, h, _PREFIX_TOKENS : _PREFIX_TOKENS + n_vis] = visual
            weights[t, h, _PREFIX_TOKENS + n_vis :] = text_share
    trace = AttentionTrace(
        weights=weights.astype(np.float32).astype(np.float64),
        visual_span=(_PREFIX_TOKENS, _PREFIX_TOKENS + n_vis),
        visual_grid=(spec.cross_grid, spec.cross_grid),
    )

    layers = tuple(
        (r, _block_self_attention(spec, r).astype(np.float32).astype(np.float64))
        for r in sorted(spec.resolutions)
    )
    stack = SelfAttentionStack(layers=layers)

    gt_grid = np.logical_or.reduce([_membership(b, spec.grid) for b in spec.blobs])
    gt_mask = BinaryMask(gt_grid)
    image_size = spec.grid * spec.image_scale
    gt_image = upsample_mask(gt_mask, image_size, image_size)
    gt_box = mask_to_box(gt_image, BoxMode.TIGHT_ALL)
    return Fixture(
        spec=spec,
        trace=trace,
        stack=stack,
        gt_mask=gt_mask,
        gt_mask_image=gt_image,
        gt_box=gt_box,
    )


def write_fixture(fixture: Fixture, out_dir: str | Path, sample_id: str | None = None) -> Path:
    """Write a fixture as a standard sample directory; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sid = sample_id or f"fixture_{fixture.spec.seed:05d}"
    attnio.write_tensor(fixture.trace.weights, out_dir / "cross_trace.npy")
    stack_paths = {}
    for res, tensor in fixture.stack.layers:
        name = f"self_attn_{res}.npy"
        attnio.write_tensor(tensor, out_dir / name)
        stack_paths[res] = name
    attnio.write_mask_png(fixture.gt_mask_image.grid, out_dir / "gt_mask.png")
    attnio.write_box_json(fixture.gt_box.as_tuple(), out_dir / "gt_box.json")
    image_size = fixture.spec.grid * fixture.spec.image_scale
    manifest = Manifest(
        sample_id=sid,
        image_size=(image_size, image_size),
        expression="synthetic referred object",
        cross_trace_path="cross_trace.npy",
        visual_span=fixture.trace.visual_span,
        visual_grid=fixture.trace.visual_grid,
        self_stack_paths=stack_paths,
        gt_mask_path="gt_mask.png",
        gt_box_path="gt_box.json",
    )
    manifest_path = out_dir / "manifest.json"
    attnio.write_manifest(manifest, manifest_path)
    return manifest_path


def _calibrated_amplitude(blob: BlobSpec, center: tuple[float, float], d_radius: float,
                          support: float, grid: int, cross_grid: int = 16) -> float:
    """Cross-attention amplitude that puts the distractor's structural
    support at roughly ``support`` relative to the blob's (cosine reading:
    region score ~ attention mass / sqrt(region size))."""
    member_c = _membership(blob, cross_grid)
    if not member_c.any():
        member_c[_pixel(blob.center, cross_grid)] = True
    edge = _boundary(member_c)
    blob_mass = blob.peak * (float(edge.sum()) + 0.15 * float((member_c & ~edge).sum()))
    blob_size = max(1, int(_membership(blob, grid).sum()))
    d = DistractorSpec(center=center, radius=d_radius)
    d_cross = max(1, int(_distractor_membership(d, cross_grid).sum()))
    d_size = max(1, int(_distractor_membership(d, grid).sum()))
    return support * blob_mass * np.sqrt(d_size / blob_size) / d_cross


def standard_spec(seed: int, *, grid: int = 64, resolutions: tuple[int, ...] = (32, 64),
                  noise_level: float = 0.02) -> FixtureSpec:
    """One-blob-plus-distractors spec with parameters drawn from the seed."""
    rng = np.random.default_rng(seed)
    center = (0.3 + 0.4 * rng.random(), 0.3 + 0.4 * rng.random())
    radius = 0.08 + 0.10 * rng.random()
    peak = 0.6 + 0.4 * rng.random()
    blob = BlobSpec(center=center, radius=radius, peak=peak)
    distractors: list[DistractorSpec] = []
    for _ in range(int(rng.integers(0, 4))):
        for _try in range(100):
            pos = (0.08 + 0.84 * rng.random(), 0.08 + 0.84 * rng.random())
            gap_to_blob = max(abs(pos[0] - center[0]), abs(pos[1] - center[1]))
            gap_to_others = min(
                (max(abs(pos[0] - d.center[0]), abs(pos[1] - d.center[1])) for d in distractors),
                default=1.0,
            )
            if gap_to_blob >= radius + 5.0 / 16.0 and gap_to_others >= 0.15:
                # most distractors outshine individual blob activations,
                # mimicking scattered high-response false positives
                if rng.random() < 0.7:
                    d_radius = 0.04 + 0.015 * rng.random()
                    support = 0.5 + 0.15 * rng.random()
                else:
                    d_radius = 0.02 + 0.01 * rng.random()
                    support = 0.1
                amplitude = _calibrated_amplitude(blob, pos, d_radius, support, grid)
                distractors.append(DistractorSpec(center=pos, amplitude=amplitude, radius=d_radius))
                break
    return FixtureSpec(
        blobs=(blob,),
        distractors=tuple(distractors),
        grid=grid,
        resolutions=resolutions,
        noise_level=noise_level,
        seed=seed,
    )


def make_suite(out_dir: str | Path, count: int = 50, base_seed: int = 0, *,
               grid: int = 64, resolutions: tuple[int, ...] = (32, 64),
               noise_level: float = 0.02) -> list[Path]:
    """Write the standard fixture suite; returns the manifest paths in order."""
    out_dir = Path(out_dir)
    manifests = []
    for i in range(count):
        seed = base_seed + i
        spec = standard_spec(seed, grid=grid, resolutions=resolutions, noise_level=noise_level)
        fixture = make_fixture(spec)
        sample_dir = out_dir / f"sample_{i:04d}"
        manifests.append(write_fixture(fixture, sample_dir, sample_id=f"sample_{i:04d}"))
    return manifests
