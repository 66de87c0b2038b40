"""A tiny autoregressive model used to verify the segmented training objective.

The model is deliberately minimal: an embedding table, a single projection,
and a softmax; the next-token distribution depends on the previous token
only. That is enough to check the decoupled image/text loss, the alpha
weighting, mask bookkeeping, and gradient exactness with 64-bit precision.
Everything is seeded and single-threaded, so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TrainingDiverged
from .geometry import GroundedSpan, NormBox
from .targets import BuildConfig, TargetSequence, VocabLayout, build_target, parse_target

# The synthetic glyph task: a 4x4 grid over a 512x512 canvas, one glyph per cell.
GLYPHS = "abcdefgh"
GRID_SIZE = 4
CANVAS = 512
CELL = CANVAS // GRID_SIZE


def toy_vocab() -> VocabLayout:
    """Compact vocabulary (563 ids) fitting the toy model's budget."""
    return VocabLayout(charset="abcdefghijklmnopqrstuvwxyz0123456789 ", n_image_tokens=len(GLYPHS))


@dataclass
class ToyModel:
    """Embedding + projection bigram model over a fixed vocabulary."""

    vocab_size: int
    dim: int
    context_window: int
    embed: np.ndarray
    proj: np.ndarray
    learning_rate: float
    seed: int

    @classmethod
    def create(
        cls,
        vocab_size: int,
        dim: int = 32,
        context_window: int = 512,
        learning_rate: float = 0.02,
        seed: int = 0,
        init_scale: float = 0.1,
    ) -> "ToyModel":
        """Seeded Gaussian init; ``init_scale=0`` gives the uniform-output model."""
        rng = np.random.default_rng(seed)
        embed = rng.normal(0.0, 1.0, size=(vocab_size, dim)) * init_scale
        proj = rng.normal(0.0, 1.0, size=(dim, vocab_size)) * init_scale
        return cls(
            vocab_size=vocab_size,
            dim=dim,
            context_window=context_window,
            embed=embed.astype(np.float64),
            proj=proj.astype(np.float64),
            learning_rate=learning_rate,
            seed=seed,
        )

    def log_probs(self, context_ids: np.ndarray) -> np.ndarray:
        """Row-stochastic log P(next | context) for each context id."""
        # Overflow from diverged parameters surfaces as a non-finite loss,
        # which the training loop reports; the numpy warnings are noise.
        with np.errstate(over="ignore", invalid="ignore"):
            hidden = self.embed[context_ids]
            logits = hidden @ self.proj
            logits -= logits.max(axis=-1, keepdims=True)
            return logits - np.log(np.exp(logits).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class SegmentedLoss:
    """Negative log-likelihood split over the image and text mask positions."""

    l_img: float
    l_text: float
    total: float
    alpha: float

    @classmethod
    def combine(cls, l_img: float, l_text: float, alpha: float) -> "SegmentedLoss":
        return cls(l_img=l_img, l_text=l_text, total=l_img + alpha * l_text, alpha=alpha)


def _supervision_arrays(
    target: TargetSequence, prompt_tokens: Sequence[int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-position (context id, target id, is-text flag) for teacher forcing.

    The first target position is conditioned on the last prompt token, so the
    prompt must be non-empty.
    """
    if not prompt_tokens:
        raise ValueError("prompt_tokens must be non-empty: the first target needs a context")
    full = list(prompt_tokens) + list(target.tokens)
    contexts = np.asarray(full[len(prompt_tokens) - 1 : -1], dtype=np.int64)
    targets = np.asarray(target.tokens, dtype=np.int64)
    is_text = np.asarray(target.text_mask, dtype=bool)
    return contexts, targets, is_text


def forward_nll(
    model: ToyModel,
    target: TargetSequence,
    prompt_tokens: Sequence[int],
    alpha: float = 1.0,
) -> SegmentedLoss:
    """Teacher-forced NLL summed separately over the image and text masks."""
    contexts, targets, is_text = _supervision_arrays(target, prompt_tokens)
    if len(prompt_tokens) + len(target.tokens) > model.context_window:
        raise ValueError(
            f"sequence length {len(prompt_tokens) + len(target.tokens)} exceeds "
            f"context window {model.context_window}"
        )
    if targets.max(initial=0) >= model.vocab_size or max(prompt_tokens) >= model.vocab_size:
        raise ValueError("token id outside the model vocabulary")
    log_p = model.log_probs(contexts)
    nll = -log_p[np.arange(len(targets)), targets]
    l_img = float(nll[~is_text].sum())
    l_text = float(nll[is_text].sum())
    return SegmentedLoss.combine(l_img, l_text, alpha)


@dataclass(frozen=True)
class Gradients:
    embed: np.ndarray
    proj: np.ndarray


def backward(
    model: ToyModel,
    target: TargetSequence,
    prompt_tokens: Sequence[int],
    alpha: float = 1.0,
) -> Gradients:
    """Analytic gradient of the combined loss w.r.t. both parameter matrices."""
    contexts, targets, is_text = _supervision_arrays(target, prompt_tokens)
    weights = np.where(is_text, alpha, 1.0)
    return _backward_arrays(model, contexts, targets, weights)


def _forward_backward(
    model: ToyModel, contexts: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, Gradients]:
    """Per-position NLL plus analytic gradients, sharing one logits pass."""
    with np.errstate(over="ignore", invalid="ignore"):
        hidden = model.embed[contexts]
        logits = hidden @ model.proj
        logits -= logits.max(axis=-1, keepdims=True)
        exp = np.exp(logits)
        norm = exp.sum(axis=-1, keepdims=True)
        rows = np.arange(len(targets))
        nll = np.log(norm[:, 0]) - logits[rows, targets]
        grad_logits = exp / norm
        grad_logits[rows, targets] -= 1.0
        grad_logits *= weights[:, None]
        grad_proj = hidden.T @ grad_logits
        grad_hidden = grad_logits @ model.proj.T
        grad_embed = np.zeros_like(model.embed)
        np.add.at(grad_embed, contexts, grad_hidden)
    return nll, Gradients(embed=grad_embed, proj=grad_proj)


def _backward_arrays(
    model: ToyModel, contexts: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> Gradients:
    return _forward_backward(model, contexts, targets, weights)[1]


@dataclass(frozen=True)
class GlyphSample:
    """One synthetic task instance: prompt tokens and the supervised target."""

    prompt_tokens: tuple[int, ...]
    target: TargetSequence
    spans: tuple[GroundedSpan, ...]
    grid: tuple[int, ...]


@dataclass(frozen=True)
class GlyphTask:
    vocab: VocabLayout
    samples: tuple[GlyphSample, ...]


def make_glyph_task(
    seed: int,
    n_samples: int,
    cfg: BuildConfig = BuildConfig(),
    vocab: VocabLayout | None = None,
) -> GlyphTask:
    """Synthetic dataset: glyph-grid 'images' with spans naming glyph cells.

    The image is GRID_SIZE x GRID_SIZE glyph tokens in row-major order; each
    span names one glyph and carries its cell box on the [0, COORD_MAX] grid.
    Deterministic per seed; every built target is checked against the parser.
    """
    vocab = vocab if vocab is not None else toy_vocab()
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_samples):
        grid = rng.integers(0, len(GLYPHS), size=GRID_SIZE * GRID_SIZE)
        n_spans = int(rng.integers(1, 4))
        cells = sorted(int(c) for c in rng.choice(GRID_SIZE * GRID_SIZE, n_spans, replace=False))
        spans = []
        for cell in cells:
            row, col = divmod(cell, GRID_SIZE)
            box = NormBox(col * CELL, row * CELL, (col + 1) * CELL, (row + 1) * CELL)
            spans.append(
                GroundedSpan(
                    text=GLYPHS[int(grid[cell])],
                    box=box,
                    source_word_indices=(cell,),
                )
            )
        image_tokens = [vocab.image_base + int(g) for g in grid]
        target = build_target(image_tokens, spans, cfg, vocab)
        parsed = parse_target(target, vocab)
        assert parsed.image_tokens == tuple(image_tokens)
        prompt = vocab.encode_text(" ".join(s.text for s in spans))
        samples.append(
            GlyphSample(
                prompt_tokens=tuple(prompt),
                target=target,
                spans=tuple(spans),
                grid=tuple(int(g) for g in grid),
            )
        )
    return GlyphTask(vocab=vocab, samples=tuple(samples))


@dataclass(frozen=True)
class TrainResult:
    model: ToyModel
    history: tuple[SegmentedLoss, ...]

    @property
    def initial(self) -> SegmentedLoss:
        return self.history[0]

    @property
    def final(self) -> SegmentedLoss:
        return self.history[-1]


def train(
    model: ToyModel,
    dataset: GlyphTask | Sequence[GlyphSample],
    steps: int,
    cfg: BuildConfig = BuildConfig(),
) -> TrainResult:
    """Full-batch gradient descent; records the segmented loss at every step.

    The recorded losses are per-sample means. History entry ``i`` is the loss
    at the parameters *before* step ``i``'s update, and one final entry holds
    the post-training loss, so ``history`` has ``steps + 1`` entries.
    """
    samples = dataset.samples if isinstance(dataset, GlyphTask) else tuple(dataset)
    if not samples:
        raise ValueError("dataset must be non-empty")
    n = len(samples)
    contexts = np.concatenate(
        [_supervision_arrays(s.target, s.prompt_tokens)[0] for s in samples]
    )
    targets = np.concatenate(
        [_supervision_arrays(s.target, s.prompt_tokens)[1] for s in samples]
    )
    is_text = np.concatenate(
        [_supervision_arrays(s.target, s.prompt_tokens)[2] for s in samples]
    )
    weights = np.where(is_text, cfg.alpha, 1.0)

    history: list[SegmentedLoss] = []

    def record(nll: np.ndarray) -> None:
        loss = SegmentedLoss.combine(
            float(nll[~is_text].sum()) / n, float(nll[is_text].sum()) / n, cfg.alpha
        )
        if not np.isfinite(loss.total):
            raise TrainingDiverged(
                f"non-finite loss after {len(history)} steps "
                f"(l_img={loss.l_img!r}, l_text={loss.l_text!r}, lr={model.learning_rate})"
            )
        history.append(loss)

    for _ in range(steps):
        nll, grads = _forward_backward(model, contexts, targets, weights)
        record(nll)
        model.embed -= model.learning_rate * grads.embed / n
        model.proj -= model.learning_rate * grads.proj / n
    log_p = model.log_probs(contexts)
    record(-log_p[np.arange(len(targets)), targets])
    return TrainResult(model=model, history=tuple(history))
