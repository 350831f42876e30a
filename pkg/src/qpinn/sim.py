"""Dense statevector execution with stride-based gate application.

Amplitudes live in arrays of shape ``(Bp, N, 2^width)``: ``Bp`` batches
parameter vectors, ``N`` batches input points, and both default to 1.
Qubit 0 is the most significant index bit, so the Pauli-Z expectation on
qubit 0 splits the amplitude array in half.

Second-order forward-mode derivatives flow through amplitudes as raw
(value, d1, d2) triples of complex arrays; the value channel performs the
same arithmetic, in the same order, as a plain run.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import circuits as cir
from .duals import Dual2, t_arccos, t_cos, t_expj, t_mul, t_scale, t_sin
from .errors import DomainError, SizeError

DEFAULT_WIDTH_CAP = 24

_SQRT2_INV = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    """Statevector; ``d1``/``d2`` carry the seeded-direction derivatives."""

    width: int
    amps: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None

    @property
    def is_dual(self) -> bool:
        return self.d1 is not None


@dataclass(frozen=True)
class ShotEstimate:
    mean: float
    n_shots: int
    std_error: float


# ---------------------------------------------------------------------------
# index helpers (cached per circuit structure)


@lru_cache(maxsize=None)
def _pair_idx(width: int, q: int, controls: tuple) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << width)
    tpos = width - 1 - q
    mask = ((idx >> tpos) & 1) == 0
    for cq, pol in controls:
        mask &= ((idx >> (width - 1 - cq)) & 1) == pol
    i0 = idx[mask]
    return i0, i0 | (1 << tpos)


@lru_cache(maxsize=None)
def _parity_idx(width: int, qa: int, qb: int, controls: tuple) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << width)
    mask = np.ones(idx.size, dtype=bool)
    for cq, pol in controls:
        mask &= ((idx >> (width - 1 - cq)) & 1) == pol
    ba = (idx >> (width - 1 - qa)) & 1
    bb = (idx >> (width - 1 - qb)) & 1
    even = ba == bb
    return idx[mask & even], idx[mask & ~even]


@lru_cache(maxsize=None)
def _group_idx(width: int, qubits: tuple) -> np.ndarray:
    """(2^k, G) index matrix: rows enumerate target-bit patterns."""
    k = len(qubits)
    t_pos = [width - 1 - q for q in qubits]
    rest = [p for p in range(width) if p not in t_pos]
    rest_idx = cir._scatter_bits(np.arange(1 << len(rest), dtype=np.int64), rest)
    base = cir._scatter_bits(np.arange(1 << k, dtype=np.int64), t_pos)
    return base[:, None] | rest_idx[None, :]


# ---------------------------------------------------------------------------
# angle and entry evaluation


def _angle(expr, params, inputs, dual: bool):
    """Angle as array broadcastable against (Bp, N, pairs); triple if dual."""
    if isinstance(expr, cir.Const):
        return (expr.value, 0.0, 0.0) if dual else expr.value
    if isinstance(expr, cir.Param):
        if dual:
            v, d1, d2 = params
            base = (v[:, expr.index], d1[:, expr.index], d2[:, expr.index])
            base = tuple(c[:, None, None] for c in base)
            return (
                expr.scale * base[0] + expr.offset,
                expr.scale * base[1],
                expr.scale * base[2],
            )
        return expr.scale * params[:, expr.index, None, None] + expr.offset
    # InputArccos
    if dual:
        v, d1, d2 = inputs
        xt = tuple(c[:, expr.var][None, :, None] for c in (v, d1, d2))
        a = t_arccos(xt)
        return (expr.scale * a[0] + expr.offset, expr.scale * a[1], expr.scale * a[2])
    xv = inputs[:, expr.var]
    if np.any(np.abs(xv) > 1.0):
        raise DomainError("arccos input outside [-1, 1]")
    return expr.scale * np.arccos(xv)[None, :, None] + expr.offset


def _mul_entry(m, a):
    """Entry × amplitude-slice product; either side may be a dual triple."""
    if isinstance(m, tuple):
        return t_mul(m, a)
    return (m * a[0], m * a[1], m * a[2])


# ---------------------------------------------------------------------------
# gate application


def _slice(state, idx):
    if isinstance(state, tuple):
        return tuple(c[..., idx] for c in state)
    return state[..., idx]


def _assign(state, idx, val):
    if isinstance(state, tuple):
        for c, v in zip(state, val):
            c[..., idx] = v
    else:
        state[..., idx] = val


def _apply_2x2(state, i0, i1, m00, m01, m10, m11, dual: bool):
    a0 = _slice(state, i0)
    a1 = _slice(state, i1)
    if dual:
        n0 = tuple(p + q for p, q in zip(_mul_entry(m00, a0), _mul_entry(m01, a1)))
        n1 = tuple(p + q for p, q in zip(_mul_entry(m10, a0), _mul_entry(m11, a1)))
    else:
        n0 = m00 * a0 + m01 * a1
        n1 = m10 * a0 + m11 * a1
    _assign(state, i0, n0)
    _assign(state, i1, n1)


def _apply_phase(state, idx, phase, dual: bool):
    a = _slice(state, idx)
    _assign(state, idx, _mul_entry(phase, a) if dual else phase * a)


def _apply_gate(g: cir.Gate, state, params, inputs, width: int, dual: bool, controls=()):
    if g.kind == "controlled":
        _apply_gate(g.inner, state, params, inputs, width, dual, controls + g.controls)
        return
    if g.kind == "h":
        i0, i1 = _pair_idx(width, g.qubits[0], controls)
        _apply_2x2(state, i0, i1, _SQRT2_INV, _SQRT2_INV, _SQRT2_INV, -_SQRT2_INV, dual)
        return
    if g.kind in ("x", "cnot"):
        ctl = controls if g.kind == "x" else controls + ((g.qubits[0], 1),)
        i0, i1 = _pair_idx(width, g.qubits[-1], ctl)
        a0 = _slice(state, i0)
        if isinstance(state, tuple):
            a0 = tuple(c.copy() for c in a0)
        else:
            a0 = a0.copy()
        _assign(state, i0, _slice(state, i1))
        _assign(state, i1, a0)
        return
    if g.kind == "rx":
        theta = _angle(g.angle, params, inputs, dual)
        i0, i1 = _pair_idx(width, g.qubits[0], controls)
        if dual:
            half = t_scale(0.5, theta)
            c = t_cos(half)
            s = t_scale(-1j, t_sin(half))
        else:
            c = np.cos(0.5 * theta)
            s = -1j * np.sin(0.5 * theta)
        _apply_2x2(state, i0, i1, c, s, s, c, dual)
        return
    if g.kind == "rz":
        theta = _angle(g.angle, params, inputs, dual)
        i0, i1 = _pair_idx(width, g.qubits[0], controls)
        if dual:
            lo = t_expj(t_scale(-0.5, theta))
            hi = t_expj(t_scale(0.5, theta))
        else:
            lo = np.exp(-0.5j * theta)
            hi = np.exp(0.5j * theta)
        _apply_phase(state, i0, lo, dual)
        _apply_phase(state, i1, hi, dual)
        return
    if g.kind == "rzz":
        theta = _angle(g.angle, params, inputs, dual)
        even, odd = _parity_idx(width, g.qubits[0], g.qubits[1], controls)
        if dual:
            lo = t_expj(t_scale(-0.5, theta))
            hi = t_expj(t_scale(0.5, theta))
        else:
            lo = np.exp(-0.5j * theta)
            hi = np.exp(0.5j * theta)
        _apply_phase(state, even, lo, dual)
        _apply_phase(state, odd, hi, dual)
        return
    if g.kind == "prepare":
        if controls:
            raise NotImplementedError("controlled PrepareAmplitudes is unsupported")
        mat = cir._householder(g.amplitudes).astype(complex)
        idx = _group_idx(width, g.qubits)
        if dual:
            for c in state:
                c[..., idx] = np.einsum("pq,...qg->...pg", mat, c[..., idx])
        else:
            state[..., idx] = np.einsum("pq,...qg->...pg", mat, state[..., idx])
        return
    raise ValueError(f"unknown gate kind {g.kind!r}")


# ---------------------------------------------------------------------------
# core simulation


def _as_batch(vec, n_cols: int):
    """Normalize a parameter/input spec to (B, n_cols) arrays; dual → triple."""
    if isinstance(vec, tuple) and len(vec) == 3 and isinstance(vec[0], np.ndarray):
        return tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in vec), True
    seq = list(np.atleast_1d(vec)) if not isinstance(vec, np.ndarray) else None
    if seq is not None and any(isinstance(e, Dual2) for e in seq):
        v = np.array([[e.v if isinstance(e, Dual2) else float(e) for e in seq]])
        d1 = np.array([[e.d1 if isinstance(e, Dual2) else 0.0 for e in seq]])
        d2 = np.array([[e.d2 if isinstance(e, Dual2) else 0.0 for e in seq]])
        return (v, d1, d2), True
    arr = np.atleast_2d(np.asarray(vec, dtype=float))
    if arr.size == 0:
        arr = arr.reshape(1, n_cols)
    return arr, False


def simulate_amps(circuit: cir.Circuit, params, inputs, *, check_norm: bool = False,
                  width_cap: int = DEFAULT_WIDTH_CAP):
    """Run a circuit from |0…0⟩; returns amplitudes shaped (Bp, N, 2^width).

    ``params``/``inputs`` may be 1-D vectors, (batch, size) arrays, or
    (value, d1, d2) triples of such arrays for a dual run.  The result is a
    complex array, or a triple of them when any argument is dual.
    """
    if circuit.width > width_cap:
        raise SizeError(f"width {circuit.width} exceeds cap {width_cap}")
    p, p_dual = _as_batch(params, circuit.n_params)
    i, i_dual = _as_batch(inputs, circuit.n_inputs)
    dual = p_dual or i_dual
    if dual and not p_dual:
        p = (p, np.zeros_like(p), np.zeros_like(p))
    if dual and not i_dual:
        i = (i, np.zeros_like(i), np.zeros_like(i))
    bp = p[0].shape[0] if dual else p.shape[0]
    n = i[0].shape[0] if dual else i.shape[0]
    dim = 1 << circuit.width

    if dual:
        v = np.zeros((bp, n, dim), dtype=complex)
        v[..., 0] = 1.0
        state = (v, np.zeros_like(v), np.zeros_like(v))
    else:
        state = np.zeros((bp, n, dim), dtype=complex)
        state[..., 0] = 1.0

    for g in circuit.gates:
        _apply_gate(g, state, p, i, circuit.width, dual)
        if check_norm and not dual:
            norms = np.sum(np.abs(state) ** 2, axis=-1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise ArithmeticError("statevector norm drifted beyond 1e-12")
    return state


def run(circuit: cir.Circuit, params=(), inputs=(), *,
        width_cap: int = DEFAULT_WIDTH_CAP) -> StateVector:
    """Execute a circuit on |0…0⟩ with scalar (possibly dual) arguments."""
    state = simulate_amps(circuit, params, inputs, check_norm=True, width_cap=width_cap)
    if isinstance(state, tuple):
        return StateVector(circuit.width, state[0][0, 0], state[1][0, 0], state[2][0, 0])
    return StateVector(circuit.width, state[0, 0])


def z0_from_amps(amps):
    """⟨Z⁽⁰⁾⟩ from an amplitude array (plain or dual triple); shape (Bp, N)."""
    if isinstance(amps, tuple):
        v, d1, d2 = amps
        vr, vi = v.real, v.imag
        r1, i1 = d1.real, d1.imag
        r2, i2 = d2.real, d2.imag
        p0 = vr * vr + vi * vi
        p1 = 2.0 * (vr * r1 + vi * i1)
        p2 = 2.0 * (vr * r2 + r1 * r1 + vi * i2 + i1 * i1)
        half = v.shape[-1] // 2
        sign = lambda a: np.sum(a[..., :half], axis=-1) - np.sum(a[..., half:], axis=-1)
        return (sign(p0), sign(p1), sign(p2))
    probs = amps.real**2 + amps.imag**2
    half = amps.shape[-1] // 2
    return np.sum(probs[..., :half], axis=-1) - np.sum(probs[..., half:], axis=-1)


def expect_z0(state: StateVector):
    """Pauli-Z expectation on qubit 0; a Dual2 when the state carries duals."""
    if state.is_dual:
        amps = tuple(c[None, None, :] for c in (state.amps, state.d1, state.d2))
        v, d1, d2 = z0_from_amps(amps)
        return Dual2(float(v[0, 0]), float(d1[0, 0]), float(d2[0, 0]))
    return float(z0_from_amps(state.amps[None, None, :])[0, 0])


def hadamard_test_shots(circuit: cir.Circuit, params, inputs, n_shots: int,
                        seed) -> ShotEstimate:
    """±1 sampling of qubit 0 from the exact marginal; deterministic per seed."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    exact = expect_z0(run(circuit, params, inputs))
    p_plus = min(max((1.0 + exact) / 2.0, 0.0), 1.0)
    k = int(np.random.default_rng(seed).binomial(n_shots, p_plus))
    mean = (2 * k - n_shots) / n_shots
    if n_shots > 1:
        ssq = (k * (1.0 - mean) ** 2 + (n_shots - k) * (-1.0 - mean) ** 2) / (n_shots - 1)
    else:
        ssq = 0.0
    return ShotEstimate(mean=mean, n_shots=n_shots, std_error=math.sqrt(ssq / n_shots))
