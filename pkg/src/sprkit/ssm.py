"""State-space sequence machinery: continuous diagonal SSMs, zero-order-hold
discretization, recurrent and convolutional scans, the input-dependent
(selective) layer, and the gated block used by the sequence model's global
branch.

The LTI analysis path (``discretize_zoh`` and the two scans) runs on plain
NumPy arrays and exists to pin down the recurrence/convolution duality.
The selective layer and the block are built from autodiff ops and are
differentiable end to end. State matrices are diagonal with strictly
negative entries; the learned layer keeps them negative by storing
log-magnitudes (A = -exp(A_log)).

ZOH here is Abar = exp(dt*a), Bbar = ((exp(dt*a) - 1)/a) * B per diagonal
entry, with the a -> 0 limit Bbar -> dt*B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError
from .rng import derive_seed, generator

_A_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ContinuousSsmParams:
    """Per-channel diagonal continuous system: A, B, C all (channels, states)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        C = np.asarray(self.C, dtype=np.float64)
        if not (A.shape == B.shape == C.shape) or A.ndim != 2:
            raise DimensionError(
                f"A/B/C must share a (channels, states) shape, got "
                f"{A.shape}/{B.shape}/{C.shape}")
        if np.any(A >= 0.0):
            raise ContractError("diagonal state matrix must be strictly negative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def channels(self) -> int:
        return self.A.shape[0]

    @property
    def states(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class Discretization:
    """Discrete-time system. For a scalar delta, Abar/Bbar are
    (channels, states); for a per-step delta of length L they are
    (L, channels, states) and only the recurrent scan accepts them."""

    Abar: np.ndarray
    Bbar: np.ndarray
    delta: float | np.ndarray

    @property
    def time_varying(self) -> bool:
        return np.ndim(self.delta) > 0


def discretize_zoh(params: ContinuousSsmParams,
                   delta: float | np.ndarray) -> Discretization:
    """Zero-order-hold discretization of a diagonal system.

    Entries with |a| below 1e-12 take the limit Bbar = delta * B.
    """
    d = np.asarray(delta, dtype=np.float64)
    if np.any(d <= 0.0):
        raise ContractError("delta must be positive")
    a = params.A
    if d.ndim == 0:
        da = float(d) * a
        d_full = np.broadcast_to(float(d), da.shape)
        B = params.B
    elif d.ndim == 1:
        da = d[:, None, None] * a[None, :, :]
        d_full = np.broadcast_to(d[:, None, None], da.shape)
        B = params.B[None, :, :]
    else:
        raise DimensionError(f"delta must be scalar or 1-D, got shape {d.shape}")
    Abar = np.exp(da)
    small = np.broadcast_to(np.abs(a) < _A_ZERO_TOL, da.shape)
    safe_a = np.broadcast_to(np.where(np.abs(a) < _A_ZERO_TOL, 1.0, a), da.shape)
    factor = np.where(small, d_full, (Abar - 1.0) / safe_a)
    return Discretization(Abar=Abar, Bbar=factor * B,
                          delta=float(d) if d.ndim == 0 else d)


def scan_recurrent(disc: Discretization, C: np.ndarray, x: np.ndarray,
                   h0: np.ndarray | None = None,
                   return_state: bool = False):
    """Exact recurrence h_t = Abar h_{t-1} + Bbar x_t, y_t = <C, h_t>.

    x is (L, channels); returns y (L, channels) and optionally the final
    hidden state (channels, states).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input sequence must be (L, channels), got {x.shape}")
    L, D = x.shape
    C = np.asarray(C, dtype=np.float64)
    N = C.shape[1]
    h = np.zeros((D, N)) if h0 is None else np.array(h0, dtype=np.float64)
    y = np.empty((L, D))
    tv = disc.time_varying
    for t in range(L):
        Abar = disc.Abar[t] if tv else disc.Abar
        Bbar = disc.Bbar[t] if tv else disc.Bbar
        h = Abar * h + Bbar * x[t][:, None]
        y[t] = np.sum(C * h, axis=1)
    if return_state:
        return y, h
    return y


def ssm_kernel(disc: Discretization, C: np.ndarray, length: int) -> np.ndarray:
    """Convolution kernel (C Bbar, C Abar Bbar, ..., C Abar^{L-1} Bbar),
    shaped (L, channels)."""
    if disc.time_varying:
        raise ContractError("convolution kernel requires a time-invariant system")
    C = np.asarray(C, dtype=np.float64)
    D, N = disc.Abar.shape
    K = np.empty((length, D))
    term = disc.Bbar.copy()
    for s in range(length):
        K[s] = np.sum(C * term, axis=1)
        term = term * disc.Abar
    return K


def scan_convolutional(disc: Discretization, C: np.ndarray,
                       x: np.ndarray) -> np.ndarray:
    """Causal convolution y_t = sum_{s=0}^{t-1} K_s x_{t-s} of the LTI
    kernel with the input; equals scan_recurrent for any LTI system."""
    if disc.time_varying:
        raise ContractError("convolution mode is LTI-only (time-varying delta)")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input sequence must be (L, channels), got {x.shape}")
    L, D = x.shape
    K = ssm_kernel(disc, C, L)
    y = np.zeros((L, D))
    for t in range(L):
        # s indexes kernel taps, t - s the input position (0-based).
        y[t] = np.sum(K[: t + 1] * x[t::-1], axis=0)
    return y


class SelectiveSsm:
    """Input-dependent SSM layer over ``dim`` channels with ``n_states``
    states per channel.

    Per step: B_t and C_t are bias-free linear maps of x_t, the timescale
    is softplus(W_delta x_t + b_delta), and the ZOH-discretized recurrence
    advances one step. The delta bias starts softplus near 0.1 so dynamics
    are live at initialization.
    """

    def __init__(self, dim: int, n_states: int, seed: int):
        rng = generator(seed, "selective-ssm")
        self.dim = dim
        self.n_states = n_states
        # A = -(1..N) at init, replicated per channel, stored as log-magnitude.
        a_init = np.log(np.arange(1, n_states + 1, dtype=np.float64))
        self.A_log = ad.param(np.tile(a_init, (dim, 1)))
        s = 1.0 / np.sqrt(dim)
        self.W_B = ad.param(rng.normal(0.0, s, size=(dim, n_states)))
        self.W_C = ad.param(rng.normal(0.0, s, size=(dim, n_states)))
        self.W_delta = ad.param(rng.normal(0.0, s, size=(dim, dim)))
        self.b_delta = ad.param(
            np.full((1, dim), np.log(np.expm1(0.1))))

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {
            f"{prefix}A_log": self.A_log,
            f"{prefix}W_B": self.W_B,
            f"{prefix}W_C": self.W_C,
            f"{prefix}W_delta": self.W_delta,
            f"{prefix}b_delta": self.b_delta,
        }

    def _shared(self):
        """Time-invariant pieces: a = -exp(A_log) and 1/a."""
        a = ad.neg(ad.exp(self.A_log))
        inv_a = ad.reciprocal(a)
        return a, inv_a

    def step(self, x_t: Tensor, h: Tensor, a: Tensor, inv_a: Tensor):
        """One recurrent step for streaming; x_t (1, dim), h (dim, n_states)."""
        D, N = self.dim, self.n_states
        B_t = ad.matmul(x_t, self.W_B)
        C_t = ad.matmul(x_t, self.W_C)
        d_t = ad.softplus(ad.add(ad.matmul(x_t, self.W_delta), self.b_delta))
        d_col = ad.reshape(d_t, (D, 1))
        da = ad.mul(ad.broadcast_cols(d_col, N), a)
        Abar = ad.exp(da)
        em1 = ad.sub(Abar, ad.ones_const(D, N))
        Bbar = ad.mul(ad.mul(em1, inv_a), ad.broadcast_rows(B_t, D))
        x_col = ad.broadcast_cols(ad.reshape(x_t, (D, 1)), N)
        h = ad.add(ad.mul(Abar, h), ad.mul(Bbar, x_col))
        y_t = ad.reshape(ad.reduce(ad.mul(h, ad.broadcast_rows(C_t, D)),
                                   "sum", axis=1), (1, D))
        return y_t, h

    def forward_batched(self, x: Tensor, seq_len: int, batch: int,
                        h0: Tensor | None = None, pinned_delta=None,
                        pinned_B=None, pinned_C=None):
        """Selective recurrence over ``batch`` independent sequences.

        ``x`` is (seq_len*batch, dim), position-major (all sequences'
        frame t, then frame t+1, ...). All input-dependent discretizations
        are materialized in one fused pass; only the O(L) state update
        runs in the loop. Returns (y like x, final states (batch*dim, N)).
        """
        D, N = self.dim, self.n_states
        LB = seq_len * batch
        if x.data.shape != (LB, D):
            raise DimensionError(
                f"expected ({LB}, {D}) input, got {x.data.shape}")
        if pinned_delta is not None or pinned_B is not None or pinned_C is not None:
            if batch != 1:
                raise ContractError("pinned parameters require batch == 1")
        a, inv_a = self._shared()
        if pinned_B is not None:
            B_all = ad.tile_block(pinned_B, seq_len)
        else:
            B_all = ad.matmul(x, self.W_B)
        if pinned_C is not None:
            C_all = ad.tile_block(pinned_C, seq_len)
        else:
            C_all = ad.matmul(x, self.W_C)
        if pinned_delta is not None:
            delta_all = ad.tile_block(pinned_delta, seq_len)
        else:
            delta_all = ad.softplus(ad.add(ad.matmul(x, self.W_delta),
                                           ad.broadcast_rows(self.b_delta, LB)))
        LBD = LB * D
        a_big = ad.tile_block(a, LB)
        inv_big = ad.tile_block(inv_a, LB)
        d_col = ad.reshape(delta_all, (LBD, 1))
        Abar = ad.exp(ad.mul(ad.broadcast_cols(d_col, N), a_big))
        em1 = ad.sub(Abar, ad.ones_const(LBD, N))
        Bbar = ad.mul(ad.mul(em1, inv_big), ad.repeat_rows(B_all, D))
        x_col = ad.broadcast_cols(ad.reshape(x, (LBD, 1)), N)
        BX = ad.mul(Bbar, x_col)
        C_exp = ad.repeat_rows(C_all, D)
        stride = batch * D
        h = h0 if h0 is not None else ad.tensor(np.zeros((stride, N)))
        ys = []
        for t in range(seq_len):
            lo, hi = t * stride, (t + 1) * stride
            h = ad.add(ad.mul(ad.slice_rows(Abar, lo, hi), h),
                       ad.slice_rows(BX, lo, hi))
            contrib = ad.mul(h, ad.slice_rows(C_exp, lo, hi))
            ys.append(ad.reshape(ad.reduce(contrib, "sum", axis=1), (batch, D)))
        return ad.concat_rows(ys), h

    def forward(self, x: Tensor, h0: Tensor | None = None,
                pinned_delta=None, pinned_B=None, pinned_C=None):
        """Run the selective recurrence over x (L, dim).

        Returns (y (L, dim), final hidden state (dim, n_states)). Pinning
        delta/B/C to constants reduces the layer to the LTI recurrence,
        which is the degeneracy check against scan_recurrent.
        """
        if x.data.ndim != 2 or x.data.shape[1] != self.dim:
            raise DimensionError(
                f"expected (L, {self.dim}) input, got {x.data.shape}")
        return self.forward_batched(x, x.data.shape[0], 1, h0=h0,
                                    pinned_delta=pinned_delta,
                                    pinned_B=pinned_B, pinned_C=pinned_C)


def selective_ssm_forward(layer: SelectiveSsm, x: Tensor, **kw):
    return layer.forward(x, **kw)


def rms_norm(x: Tensor, gain: Tensor, eps: float = 1e-8) -> Tensor:
    """Root-mean-square normalization over channels with a learned gain."""
    L, D = x.data.shape
    sq = ad.mul(x, x)
    ms = ad.reduce_mean(sq, axis=1)
    inv = ad.reciprocal(ad.sqrt(ad.add(ms, ad.tensor(np.full(L, eps)))))
    inv_mat = ad.broadcast_cols(ad.reshape(inv, (L, 1)), D)
    return ad.mul(ad.mul(x, inv_mat), ad.broadcast_rows(gain, L))


class MambaBlock:
    """Pre-normalized gated selective-SSM block with a residual connection.

    y = x + OutProj( SiLU(GateProj(xn)) * SelectiveSSM(SiLU(InProj(xn))) )
    where xn is the RMS-normalized input and the hidden width is
    ``expand * dim``. Projections are bias-free.
    """

    def __init__(self, dim: int, n_states: int, seed: int, expand: int = 2):
        rng = generator(seed, "mamba-block")
        self.dim = dim
        self.hidden = expand * dim
        s_in = 1.0 / np.sqrt(dim)
        s_out = 1.0 / np.sqrt(self.hidden)
        self.norm_gain = ad.param(np.ones((1, dim)))
        self.W_in = ad.param(rng.normal(0.0, s_in, size=(dim, self.hidden)))
        self.W_gate = ad.param(rng.normal(0.0, s_in, size=(dim, self.hidden)))
        self.W_out = ad.param(rng.normal(0.0, s_out, size=(self.hidden, dim)))
        self.ssm = SelectiveSsm(self.hidden, n_states, derive_seed(seed, "ssm"))

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {
            f"{prefix}norm_gain": self.norm_gain,
            f"{prefix}W_in": self.W_in,
            f"{prefix}W_gate": self.W_gate,
            f"{prefix}W_out": self.W_out,
        }
        out.update(self.ssm.parameters(prefix=f"{prefix}ssm."))
        return out

    def forward_batched(self, x: Tensor, seq_len: int, batch: int) -> Tensor:
        if x.data.shape != (seq_len * batch, self.dim):
            raise DimensionError(
                f"expected ({seq_len * batch}, {self.dim}) input, got {x.data.shape}")
        xn = rms_norm(x, self.norm_gain)
        act = ad.silu(ad.matmul(xn, self.W_in))
        gate = ad.silu(ad.matmul(xn, self.W_gate))
        y_ssm, _ = self.ssm.forward_batched(act, seq_len, batch)
        out = ad.matmul(ad.mul(gate, y_ssm), self.W_out)
        return ad.add(x, out)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.dim:
            raise DimensionError(
                f"expected (L, {self.dim}) input, got {x.data.shape}")
        return self.forward_batched(x, x.data.shape[0], 1)

    def step(self, x_t: Tensor, h: Tensor, shared=None):
        """Single-position forward for streaming inference.

        ``h`` is the SSM hidden state (hidden, n_states); ``shared`` caches
        the layer's time-invariant tensors between steps.
        """
        if shared is None:
            shared = self.ssm._shared()
        a, inv_a = shared
        xn = rms_norm(x_t, self.norm_gain)
        act = ad.silu(ad.matmul(xn, self.W_in))
        gate = ad.silu(ad.matmul(xn, self.W_gate))
        y_t, h = self.ssm.step(act, h, a, inv_a)
        out = ad.matmul(ad.mul(gate, y_t), self.W_out)
        return ad.add(x_t, out), h, shared

    def initial_state(self) -> Tensor:
        return ad.tensor(np.zeros((self.hidden, self.ssm.n_states)))


def mamba_block_forward(block: MambaBlock, x: Tensor) -> Tensor:
    return block.forward(x)


def last_hidden_select(y: Tensor) -> Tensor:
    """Select the final position of a (L, dim) sequence as a (1, dim) row."""
    if y.data.ndim != 2 or y.data.shape[0] == 0:
        raise ContractError("last_hidden_select needs a non-empty sequence")
    L = y.data.shape[0]
    return ad.slice_rows(y, L - 1, L)
