"""Multi-head attention fusion, encoder and discriminator, with exact
reverse-mode gradients.

Architecture, for M receiver channels each carrying a D = 4N feature vector:

* attention (per head w of W): the query is a projection of the receiver
  mean, keys and values are shared projections of each receiver vector, and
  a learned per-receiver score bias lets a head statically prefer or avoid
  receivers.  Scores are scaled dot products; the softmax over receivers is
  the head's receiver weighting and the head output is the value-projected
  convex combination of the inputs.
* encoder: an MLP shared by all heads, tanh hidden layers, linear output.
* discriminator: a single logistic unit on the encoder features, shared by
  all heads; binary cross-entropy is the training loss.

Everything is float64 numpy.  The backward pass is hand-derived and checked
against central finite differences in the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelDims",
    "SeparatorModel",
    "Forward",
    "bce_loss",
    "sigmoid",
]


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(p, labels) -> float:
    """Mean binary cross-entropy on probabilities, with 0 * log(0) = 0."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(labels, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(y != 0, y * np.log(p), 0.0)
        t2 = np.where(y != 1, (1.0 - y) * np.log1p(-p), 0.0)
    return float(-np.mean(t1 + t2))


def _bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Elementwise stable BCE from logits."""
    return np.maximum(logits, 0.0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))


@dataclass(frozen=True)
class ModelDims:
    """Shape bundle; ``input_dim`` is 4 * window_bins (re/im of two slices)."""

    n_receivers: int
    window_bins: int
    heads: int = 8
    attn_dim: int = 8
    enc_hidden: tuple[int, int] = (64, 32)
    feat_dim: int = 8

    def __post_init__(self) -> None:
        if min(self.n_receivers, self.window_bins, self.heads, self.attn_dim, self.feat_dim) < 1:
            raise ValueError("all dimensions must be positive")
        if len(self.enc_hidden) != 2:
            raise ValueError("encoder uses exactly two hidden layers")

    @property
    def input_dim(self) -> int:
        return 4 * self.window_bins

    @property
    def encoder_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.enc_hidden, self.feat_dim)


# Parameter declaration order; checkpoints serialize in exactly this order.
PARAM_ORDER = (
    "attn_query",
    "attn_key",
    "attn_value",
    "attn_bias",
    "enc_w1",
    "enc_b1",
    "enc_w2",
    "enc_b2",
    "enc_w3",
    "enc_b3",
    "disc_w",
    "disc_b",
)


@dataclass
class Forward:
    """Cached forward-pass tensors needed by the backward pass."""

    x: np.ndarray          # (B, M, D)
    ybar: np.ndarray       # (B, D)
    q: np.ndarray          # (B, W, A)
    k: np.ndarray          # (B, M, W, A)
    alpha: np.ndarray      # (B, W, M) softmax over receivers
    u: np.ndarray          # (B, W, D) attention-mixed inputs
    z: np.ndarray          # (B, W, D) value-projected head outputs
    a1: np.ndarray         # (B*W, H1)
    a2: np.ndarray         # (B*W, H2)
    feats: np.ndarray      # (B*W, F)
    logits: np.ndarray     # (B, W)

    @property
    def probabilities(self) -> np.ndarray:
        return sigmoid(self.logits)


class SeparatorModel:
    """Attention + encoder + discriminator parameter bundle.

    lag_frames records the positive-pair lag the model was trained with so
    inference can rebuild identical input stacks.
    """

    def __init__(self, dims: ModelDims, params: dict[str, np.ndarray], lag_frames: int = 50):
        self.dims = dims
        self.params = params
        self.lag_frames = int(lag_frames)
        self._validate()

    def _validate(self) -> None:
        d = self.dims
        expected = self.shapes(d)
        for name in PARAM_ORDER:
            if name not in self.params:
                raise ValueError(f"missing parameter {name}")
            got = self.params[name].shape
            if got != expected[name]:
                raise ValueError(f"{name}: shape {got} != expected {expected[name]}")
            self.params[name] = np.asarray(self.params[name], dtype=np.float64)
        if self.lag_frames < 1:
            raise ValueError("lag_frames must be >= 1")

    @staticmethod
    def shapes(d: ModelDims) -> dict[str, tuple]:
        D, A, W, M = d.input_dim, d.attn_dim, d.heads, d.n_receivers
        H1, H2, F = d.enc_hidden[0], d.enc_hidden[1], d.feat_dim
        return {
            "attn_query": (W, A, D),
            "attn_key": (W, A, D),
            "attn_value": (W, D, D),
            "attn_bias": (W, M),
            "enc_w1": (H1, D),
            "enc_b1": (H1,),
            "enc_w2": (H2, H1),
            "enc_b2": (H2,),
            "enc_w3": (F, H2),
            "enc_b3": (F,),
            "disc_w": (F,),
            "disc_b": (),
        }

    # Key init gain: keys start as scaled copies of the queries so that a
    # score q.k ~ <mean input, receiver input> ranks receivers by energy.
    KEY_INIT_GAIN = 3.0

    @classmethod
    def initialize(
        cls, dims: ModelDims, rng: np.random.Generator, lag_frames: int = 50
    ) -> "SeparatorModel":
        """Random init with three deliberate asymmetries.

        * Keys start equal to the queries (scaled): initial attention then
          follows per-receiver energy, a sensible physical prior that
          training refines, instead of an arbitrary random ranking.
        * Values start near identity so the fused window's bin structure
          reaches the encoder unscrambled.
        * Encoder biases start spread out: around zero the tanh units are
          odd functions, blind to the even (cross-covariance) statistics
          that separate true-lag pairs from shuffled ones, so a zero-bias
          start sits on a plateau of the contrastive loss.
        """
        shapes = cls.shapes(dims)
        params: dict[str, np.ndarray] = {}
        for name in PARAM_ORDER:
            shape = shapes[name]
            if name == "attn_bias":
                params[name] = 0.1 * rng.standard_normal(shape)
            elif name == "attn_value":
                eye = np.eye(shape[1])[None]
                params[name] = eye + 0.05 * rng.standard_normal(shape)
            elif name.startswith("enc_b"):
                params[name] = 0.4 * rng.standard_normal(shape)
            elif name == "disc_b":
                params[name] = np.zeros(())
            elif name == "disc_w":
                params[name] = 0.1 * rng.standard_normal(shape)
            else:
                fan_in = shape[-1]
                params[name] = rng.standard_normal(shape) / math.sqrt(fan_in)
        params["attn_key"] = cls.KEY_INIT_GAIN * params["attn_query"]
        return cls(dims, params, lag_frames)

    def n_parameters(self) -> int:
        return sum(self.params[n].size for n in PARAM_ORDER)

    def param_vector(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in PARAM_ORDER])

    def set_param_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for name in PARAM_ORDER:
            size = self.params[name].size
            self.params[name] = vec[pos : pos + size].reshape(self.params[name].shape).copy()
            pos += size
        if pos != vec.size:
            raise ValueError("parameter vector length mismatch")

    # -- forward ----------------------------------------------------------

    def attention_fuse(self, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Fuse per-receiver vectors into per-head outputs.

        inputs: (M, D) or (B, M, D) -> (heads, D) or (B, heads, D), plus the
        softmax receiver weights with matching leading shape.
        """
        single = inputs.ndim == 2
        x = inputs[None] if single else inputs
        fw = self.forward(x)
        if single:
            return fw.z[0], fw.alpha[0]
        return fw.z, fw.alpha

    def forward(self, x: np.ndarray) -> Forward:
        """Full forward pass on a batch x of shape (B, M, D)."""
        d = self.dims
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != d.n_receivers or x.shape[2] != d.input_dim:
            raise ValueError(
                f"expected (B, {d.n_receivers}, {d.input_dim}) inputs, got {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite values in model input")
        p = self.params
        B, M, D = x.shape
        W, A = d.heads, d.attn_dim

        # Heavy contractions are phrased as matmuls so BLAS handles them.
        q_mat = p["attn_query"].transpose(2, 0, 1).reshape(D, W * A)
        k_mat = p["attn_key"].transpose(2, 0, 1).reshape(D, W * A)

        ybar = x.mean(axis=1)                                   # (B, D)
        q = (ybar @ q_mat).reshape(B, W, A)                     # (B, W, A)
        k = (x.reshape(B * M, D) @ k_mat).reshape(B, M, W, A)
        k_t = k.transpose(0, 2, 1, 3)                           # (B, W, M, A)
        scores = (k_t * q[:, :, None, :]).sum(axis=3) / math.sqrt(A) + p["attn_bias"][None]
        scores -= scores.max(axis=2, keepdims=True)             # softmax stability
        ex = np.exp(scores)
        alpha = ex / ex.sum(axis=2, keepdims=True)              # (B, W, M)
        u = np.matmul(alpha, x)                                 # (B, W, D)
        z = np.empty_like(u)
        for w in range(W):
            z[:, w, :] = u[:, w, :] @ p["attn_value"][w].T      # (B, D)

        flat = z.reshape(B * W, D)
        a1 = np.tanh(flat @ p["enc_w1"].T + p["enc_b1"])
        a2 = np.tanh(a1 @ p["enc_w2"].T + p["enc_b2"])
        feats = a2 @ p["enc_w3"].T + p["enc_b3"]
        logits = (feats @ p["disc_w"] + p["disc_b"]).reshape(B, W)
        if not np.all(np.isfinite(logits)):
            raise FloatingPointError("non-finite values in forward pass")
        return Forward(x, ybar, q, k, alpha, u, z, a1, a2, feats, logits)

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Per-head encoder features, (B, W, F)."""
        fw = self.forward(x)
        B = x.shape[0]
        return fw.feats.reshape(B, self.dims.heads, self.dims.feat_dim)

    def discriminate(self, x: np.ndarray) -> np.ndarray:
        """Per-head probability that a stacked pair is a true-lag pair."""
        return self.forward(x).probabilities

    # -- loss and gradients ------------------------------------------------

    def loss(self, x: np.ndarray, labels: np.ndarray, reduction: str = "mean") -> float:
        fw = self.forward(x)
        per = _bce_with_logits(fw.logits, np.asarray(labels, float)[:, None])
        return float(per.mean() if reduction == "mean" else per.sum())

    def loss_and_gradients(
        self, x: np.ndarray, labels: np.ndarray, reduction: str = "mean"
    ) -> tuple[float, dict[str, np.ndarray]]:
        """BCE loss and its exact gradient for every parameter.

        ``reduction`` "mean" averages over samples and heads (the training
        default); "sum" totals instead.
        """
        if reduction not in ("mean", "sum"):
            raise ValueError("reduction must be 'mean' or 'sum'")
        d = self.dims
        p = self.params
        fw = self.forward(x)
        B, M, D = fw.x.shape
        W, A = d.heads, d.attn_dim
        y = np.asarray(labels, dtype=float)
        if y.shape != (B,):
            raise ValueError(f"labels must have shape ({B},)")

        per = _bce_with_logits(fw.logits, y[:, None])
        denom = float(per.size) if reduction == "mean" else 1.0
        loss = float(per.sum() / denom)

        g: dict[str, np.ndarray] = {}
        # d loss / d logit
        g_logit = (sigmoid(fw.logits) - y[:, None]) / denom     # (B, W)
        gl = g_logit.reshape(B * W)

        g["disc_w"] = fw.feats.T @ gl
        g["disc_b"] = np.asarray(gl.sum())
        g_feats = np.outer(gl, p["disc_w"])                     # (B*W, F)

        g["enc_w3"] = g_feats.T @ fw.a2
        g["enc_b3"] = g_feats.sum(axis=0)
        g_a2 = (g_feats @ p["enc_w3"]) * (1.0 - fw.a2 ** 2)

        g["enc_w2"] = g_a2.T @ fw.a1
        g["enc_b2"] = g_a2.sum(axis=0)
        g_a1 = (g_a2 @ p["enc_w2"]) * (1.0 - fw.a1 ** 2)

        zflat = fw.z.reshape(B * W, D)
        g["enc_w1"] = g_a1.T @ zflat
        g["enc_b1"] = g_a1.sum(axis=0)
        g_z = (g_a1 @ p["enc_w1"]).reshape(B, W, D)

        g_value = np.empty_like(p["attn_value"])
        g_u = np.empty_like(fw.u)
        for w in range(W):
            g_value[w] = g_z[:, w, :].T @ fw.u[:, w, :]
            g_u[:, w, :] = g_z[:, w, :] @ p["attn_value"][w]
        g["attn_value"] = g_value

        g_alpha = np.matmul(g_u, fw.x.transpose(0, 2, 1))       # (B, W, M)
        # softmax Jacobian: alpha * (g - <alpha, g>)
        inner = np.sum(fw.alpha * g_alpha, axis=2, keepdims=True)
        g_scores = fw.alpha * (g_alpha - inner)                 # (B, W, M)

        g["attn_bias"] = g_scores.sum(axis=0)
        scale = 1.0 / math.sqrt(A)
        k_t = fw.k.transpose(0, 2, 1, 3)                        # (B, W, M, A)
        g_q = (g_scores[:, :, :, None] * k_t).sum(axis=2) * scale          # (B, W, A)
        g_k_t = g_scores[:, :, :, None] * fw.q[:, :, None, :] * scale      # (B, W, M, A)
        g_k_flat = g_k_t.transpose(0, 2, 1, 3).reshape(B * M, W * A)

        x_flat = fw.x.reshape(B * M, D)
        g["attn_key"] = (g_k_flat.T @ x_flat).reshape(W, A, D)
        g["attn_query"] = (
            g_q.reshape(B, W * A).T @ fw.ybar
        ).reshape(W, A, D)

        for name in PARAM_ORDER:
            if g[name].shape != p[name].shape:
                raise AssertionError(f"gradient shape mismatch for {name}")
        return loss, g

    def input_gradient(
        self, x: np.ndarray, labels: np.ndarray, reduction: str = "mean"
    ) -> np.ndarray:
        """Exact d loss / d x, shape (B, M, D); used by linearity checks."""
        d = self.dims
        p = self.params
        fw = self.forward(x)
        B, M, D = fw.x.shape
        W, A = d.heads, d.attn_dim
        y = np.asarray(labels, dtype=float)
        per = _bce_with_logits(fw.logits, y[:, None])
        denom = float(per.size) if reduction == "mean" else 1.0
        g_logit = (sigmoid(fw.logits) - y[:, None]) / denom
        gl = g_logit.reshape(B * W)
        g_feats = np.outer(gl, p["disc_w"])
        g_a2 = (g_feats @ p["enc_w3"]) * (1.0 - fw.a2 ** 2)
        g_a1 = (g_a2 @ p["enc_w2"]) * (1.0 - fw.a1 ** 2)
        g_z = (g_a1 @ p["enc_w1"]).reshape(B, W, D)
        g_u = np.einsum("wed,bwe->bwd", p["attn_value"], g_z)
        g_x = np.einsum("bwm,bwd->bmd", fw.alpha, g_u)
        g_alpha = np.einsum("bwd,bmd->bwm", g_u, fw.x)
        inner = np.sum(fw.alpha * g_alpha, axis=2, keepdims=True)
        g_scores = fw.alpha * (g_alpha - inner)
        scale = 1.0 / math.sqrt(A)
        g_q = np.einsum("bwm,bmwa->bwa", g_scores, fw.k) * scale
        g_k = np.einsum("bwm,bwa->bmwa", g_scores, fw.q) * scale
        g_x += np.einsum("wad,bmwa->bmd", p["attn_key"], g_k)
        g_ybar = np.einsum("wad,bwa->bd", p["attn_query"], g_q)
        g_x += g_ybar[:, None, :] / M
        return g_x
