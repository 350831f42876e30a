"""Polynomial algebra and the QSP/LCU/tensor-decomposed circuit constructions.

The single-qubit chain ``R_z(θ_d)·∏_{j<d}[R_x(-2 arccos x)·R_z(θ_j)]`` realizes,
through ⟨+|·|+⟩, polynomials of degree ≤ d with parity d mod 2.  A parity
split over two chains removes the parity constraint at the price of a ½
normalization, and LCU ancillae extend the construction to multivariate and
tensor-decomposed polynomials.

Angle synthesis is numerical (damped Gauss–Newton least squares on the
complex chain value, with restarts): it targets both the real part and a
vanishing imaginary part, since products over variables in the multivariate
circuits are only exactly polynomial when each per-variable value is real.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import polynomial as _poly

from . import circuits as cir
from .duals import t_mul, t_scale, t_sqrt, t_sub
from .errors import BoundError, DomainError, SizeError, SynthesisError

# ---------------------------------------------------------------------------
# coefficient containers


@dataclass(frozen=True)
class UnivariatePoly:
    """Power-basis coefficients c_0..c_L; trailing zeros permitted."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return _poly.polyval(x, np.asarray(self.coeffs))

    def sup_norm_grid(self, n: int = 512) -> float:
        return float(np.max(np.abs(self(np.linspace(-1.0, 1.0, n)))))


@dataclass(frozen=True)
class TdPoly:
    """Tensor-decomposed polynomial Σ_r λ_r ∏_j p_{r,j}(x_j)."""

    R: int
    D: int
    L: int
    lambdas: tuple[float, ...]
    factors: tuple[tuple[UnivariatePoly, ...], ...]

    def __post_init__(self):
        if not 1 <= self.R <= (self.L + 1) ** self.D:
            raise ValueError("tensor rank must lie in [1, (L+1)^D]")
        if len(self.lambdas) != self.R or len(self.factors) != self.R:
            raise ValueError("lambdas/factors length must equal R")
        for row in self.factors:
            if len(row) != self.D:
                raise ValueError("each factor row must have D polynomials")
            for p in row:
                if p.degree > self.L:
                    raise ValueError("factor degree exceeds L")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.D)
        acc = np.zeros(pts.shape[0])
        for lam, row in zip(self.lambdas, self.factors):
            term = np.full(pts.shape[0], lam)
            for j, p in enumerate(row):
                term = term * p(pts[:, j])
            acc += term
        return acc if x.ndim > 1 else float(acc[0])


@dataclass(frozen=True)
class MonomialList:
    """Sparse multivariate coefficients: (multi-index, coefficient) pairs."""

    entries: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        seen = set()
        for n, _ in self.entries:
            if n in seen:
                raise ValueError(f"duplicate multi-index {n}")
            seen.add(n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, len(self.entries[0][0]))
        acc = np.zeros(pts.shape[0])
        for n, c in self.entries:
            term = np.full(pts.shape[0], c)
            for j, nj in enumerate(n):
                term = term * pts[:, j] ** nj
            acc += term
        return acc if x.ndim > 1 else float(acc[0])

    def nonzero(self, tol: float = 0.0) -> "MonomialList":
        return MonomialList(tuple(e for e in self.entries if abs(e[1]) > tol))


@dataclass(frozen=True)
class QspAngles:
    """Rotation angles of one chain; length L or L+1 per parity branch."""

    theta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))

    def __len__(self) -> int:
        return len(self.theta)


def _angles_of(a) -> np.ndarray:
    theta = a.theta if isinstance(a, QspAngles) else a
    return np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# 2×2 chain evaluation (the dequantized path)


def chain_value(thetas, x):
    """⟨+|U_θ(x)|+⟩ for the chain of degree len(θ)-1.

    ``thetas``: (k,) or (B, k) plain angles.  ``x``: scalar, (N,) array, or a
    (value, d1, d2) dual triple.  Returns a complex scalar/(B, N) array, or a
    triple of them for dual input.
    """
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    dual = isinstance(x, tuple)
    if dual:
        xv = tuple(np.atleast_1d(np.asarray(c, dtype=float))[None, :] for c in x)
        if np.any(np.abs(xv[0]) >= 1.0):
            raise DomainError("dual chain evaluation requires |x| < 1")
        one = np.ones_like(xv[0])
        s = t_sqrt(t_sub((one, 0.0 * one, 0.0 * one), t_mul(xv, xv)))
        js = t_scale(1j, s)
    else:
        xv = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        if np.any(np.abs(xv) > 1.0):
            raise DomainError("chain evaluation requires |x| <= 1")
        js = 1j * np.sqrt(np.maximum(1.0 - xv * xv, 0.0))

    b, n = th.shape[0], (xv[0] if dual else xv).shape[1]
    shape = (b, n)
    if dual:
        z = np.zeros(shape, dtype=complex)
        u = (np.full(shape, 1.0 / math.sqrt(2.0), dtype=complex), z.copy(), z.copy())
        v = (u[0].copy(), z.copy(), z.copy())
    else:
        u = np.full(shape, 1.0 / math.sqrt(2.0), dtype=complex)
        v = u.copy()

    for j in range(th.shape[1]):
        lo = np.exp(-0.5j * th[:, j])[:, None]
        hi = np.exp(0.5j * th[:, j])[:, None]
        if dual:
            u = t_scale(lo, u)
            v = t_scale(hi, v)
            if j < th.shape[1] - 1:
                nu = tuple(a + c for a, c in zip(t_mul(xv, u), t_mul(js, v)))
                nv = tuple(a + c for a, c in zip(t_mul(js, u), t_mul(xv, v)))
                u, v = nu, nv
        else:
            u = lo * u
            v = hi * v
            if j < th.shape[1] - 1:
                u, v = xv * u + js * v, js * u + xv * v

    if dual:
        out = tuple((a + c) / math.sqrt(2.0) for a, c in zip(u, v))
    else:
        out = (u + v) / math.sqrt(2.0)
    return out


def qsp_value(theta, x: float) -> complex:
    """⟨+|U_θ(x)|+⟩ at a single point via the 2×2 matrix chain."""
    if abs(x) > 1.0:
        raise DomainError("qsp_value requires |x| <= 1")
    val = chain_value(_angles_of(theta), float(x))
    return complex(val[0, 0])


# ---------------------------------------------------------------------------
# polynomial plumbing


def parity_split(p: UnivariatePoly) -> tuple[UnivariatePoly, UnivariatePoly]:
    """(p_odd, p_even) with p_odd(x)=p(x)-p(-x), p_even(x)=p(x)+p(-x)."""
    odd = tuple(2.0 * c if k % 2 else 0.0 for k, c in enumerate(p.coeffs))
    even = tuple(0.0 if k % 2 else 2.0 * c for k, c in enumerate(p.coeffs))
    return UnivariatePoly(odd), UnivariatePoly(even)


class PolyFit(NamedTuple):
    poly: UnivariatePoly
    max_residual: float


def extract_polynomial(value_fn, L: int) -> PolyFit:
    """Fit a degree-≤L polynomial on L+1 Chebyshev nodes.

    The residual, measured on 257 fresh grid points, certifies (when < 1e-8)
    that ``value_fn`` is itself a polynomial of degree ≤ L.
    """
    nodes = np.cos(np.pi * (2.0 * np.arange(L + 1) + 1.0) / (2.0 * (L + 1)))
    vals = np.array([float(value_fn(t)) for t in nodes])
    cheb_coeffs = _cheb.chebfit(nodes, vals, L)
    coeffs = _cheb.cheb2poly(cheb_coeffs)
    poly = UnivariatePoly(tuple(np.pad(coeffs, (0, L + 1 - coeffs.size))))
    grid = np.linspace(-1.0, 1.0, 257)
    residual = float(np.max(np.abs(poly(grid) - np.array([float(value_fn(t)) for t in grid]))))
    return PolyFit(poly, residual)


def expand_td(p: TdPoly) -> MonomialList:
    """Full coefficient tensor c_n = Σ_r λ_r c_{r,n_1}···c_{r,n_D}."""
    size = (p.L + 1) ** p.D
    if size > 10**6:
        raise SizeError(f"tensor grid of {size} entries exceeds the 10^6 cap")
    tensor = np.zeros((p.L + 1,) * p.D)
    for lam, row in zip(p.lambdas, p.factors):
        acc = np.array([1.0])
        for poly in row:
            cs = np.pad(np.asarray(poly.coeffs), (0, p.L + 1 - len(poly.coeffs)))
            acc = np.multiply.outer(acc, cs)
        tensor += lam * acc.reshape((p.L + 1,) * p.D)
    entries = tuple(
        (idx, float(tensor[idx])) for idx in iter_product(range(p.L + 1), repeat=p.D)
    )
    return MonomialList(entries)


# ---------------------------------------------------------------------------
# angle synthesis


def _chain_residual_jac(theta: np.ndarray, xs: np.ndarray, target: np.ndarray):
    """Complex residual v(θ,x)-q(x) on nodes, and ∂v/∂θ (forward/backward)."""
    d = theta.size - 1
    k = xs.size
    s = 1j * np.sqrt(1.0 - xs * xs)
    fwd = np.empty((d + 1, k, 2), dtype=complex)
    state = np.full((k, 2), 1.0 / math.sqrt(2.0), dtype=complex)
    for j in range(d + 1):
        state = state * np.stack(
            [np.full(k, np.exp(-0.5j * theta[j])), np.full(k, np.exp(0.5j * theta[j]))], axis=1
        )
        fwd[j] = state
        if j < d:
            state = np.stack(
                [xs * state[:, 0] + s * state[:, 1], s * state[:, 0] + xs * state[:, 1]], axis=1
            )
    bwd = np.empty((d + 1, k, 2), dtype=complex)
    row = np.full((k, 2), 1.0 / math.sqrt(2.0), dtype=complex)
    bwd[d] = row
    for j in range(d - 1, -1, -1):
        rz = np.stack(
            [row[:, 0] * np.exp(-0.5j * theta[j + 1]), row[:, 1] * np.exp(0.5j * theta[j + 1])],
            axis=1,
        )
        row = np.stack([xs * rz[:, 0] + s * rz[:, 1], s * rz[:, 0] + xs * rz[:, 1]], axis=1)
        bwd[j] = row
    value = bwd[d][:, 0] * fwd[d][:, 0] + bwd[d][:, 1] * fwd[d][:, 1]
    jac = np.empty((k, d + 1), dtype=complex)
    for j in range(d + 1):
        jac[:, j] = -0.5j * bwd[j][:, 0] * fwd[j][:, 0] + 0.5j * bwd[j][:, 1] * fwd[j][:, 1]
    return value - target, jac


def _synthesize_branch(target: UnivariatePoly, degree: int, rng: np.random.Generator,
                       restarts: int = 16, iters: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Angles of a degree-``degree`` chain with ⟨+|U_θ(x)|+⟩ ≈ target(x) (real)."""
    if degree == 0:
        c = float(np.clip(target.coeffs[0] if target.coeffs else 0.0, -1.0, 1.0))
        return np.array([2.0 * math.acos(c)])
    k = 4 * degree + 8
    xs = np.cos(np.pi * (2.0 * np.arange(k) + 1.0) / (2.0 * k))
    tv = target(xs)
    best, best_err = None, np.inf
    for attempt in range(restarts):
        theta = np.zeros(degree + 1) if attempt == 0 else rng.normal(0.0, 0.6, degree + 1)
        mu = 1e-3
        res, jac = _chain_residual_jac(theta, xs, tv)
        err = np.max(np.abs(res))
        for _ in range(iters):
            jr = np.concatenate([jac.real, jac.imag], axis=0)
            rr = np.concatenate([res.real, res.imag])
            jtj = jr.T @ jr
            step = np.linalg.solve(jtj + mu * np.eye(degree + 1), -jr.T @ rr)
            cand = theta + step
            c_res, c_jac = _chain_residual_jac(cand, xs, tv)
            c_err = np.max(np.abs(c_res))
            if c_err < err:
                theta, res, jac, err = cand, c_res, c_jac, c_err
                mu = max(mu * 0.3, 1e-12)
                if err < tol:
                    break
            else:
                mu *= 10.0
                if mu > 1e8:
                    break
        if err < best_err:
            best, best_err = theta, err
        if best_err < tol:
            break
    if best_err > 1e-9:
        raise SynthesisError(
            f"branch synthesis stalled at residual {best_err:.3e} (degree {degree})"
        )
    return best


def synthesize_angles(target: UnivariatePoly, L: int, seed: int = 0
                      ) -> tuple[QspAngles, QspAngles]:
    """Parity-split angle pair: ½[Re v(θ1,x) + Re v(θ2,x)] = target(x).

    θ1 drives the degree-(L-1) chain for the parity-(L-1 mod 2) component,
    θ2 the degree-L chain for the parity-(L mod 2) component.
    """
    if L < 1:
        raise ValueError("synthesis requires L >= 1")
    if target.degree > L and any(abs(c) > 0 for c in target.coeffs[L + 1:]):
        raise ValueError(f"target degree exceeds L={L}")
    if target.sup_norm_grid() > 0.5 + 1e-12:
        raise BoundError("target sup-norm exceeds 1/2 on [-1, 1]")
    p_odd, p_even = parity_split(target)
    t1, t2 = (p_odd, p_even) if L % 2 == 0 else (p_even, p_odd)
    rng = np.random.default_rng(seed)
    theta1 = _synthesize_branch(t1, L - 1, rng)
    theta2 = _synthesize_branch(t2, L, rng)
    nodes = np.cos(np.pi * (2.0 * np.arange(4 * L + 4) + 1.0) / (2.0 * (4 * L + 4)))
    combo = 0.5 * (
        chain_value(theta1, nodes).real[0] + chain_value(theta2, nodes).real[0]
    )
    residual = float(np.max(np.abs(combo - target(nodes))))
    if residual > 1e-8:
        raise SynthesisError(f"combined synthesis residual {residual:.3e} exceeds 1e-8")
    return QspAngles(tuple(theta1)), QspAngles(tuple(theta2))


# ---------------------------------------------------------------------------
# circuit constructions


def _chain_gates(qubit: int, angle_exprs, input_var: int, controls) -> list[cir.Gate]:
    gates = [cir.controlled(cir.rz(qubit, angle_exprs[0]), controls)]
    for expr in angle_exprs[1:]:
        gates.append(cir.controlled(cir.rx(qubit, cir.InputArccos(input_var)), controls))
        gates.append(cir.controlled(cir.rz(qubit, expr), controls))
    return gates


def _param_exprs(base: int, count: int) -> list[cir.AngleExpr]:
    return [cir.Param(base + i) for i in range(count)]


def _const_exprs(values) -> list[cir.AngleExpr]:
    return [cir.Const(float(v)) for v in values]


def univariate_model_circuit(L: int) -> cir.Circuit:
    """Parametric 3-qubit parity-split model: slots 0..L-1 = θ1, L..2L = θ2."""
    if L < 1:
        raise ValueError("univariate model requires L >= 1")
    gates = [cir.h(0), cir.h(1), cir.h(2)]
    gates += _chain_gates(2, _param_exprs(0, L), 0, ((0, 1), (1, 0)))
    gates += _chain_gates(2, _param_exprs(L, L + 1), 0, ((0, 1), (1, 1)))
    gates.append(cir.h(0))
    return cir.Circuit(3, tuple(gates), n_params=2 * L + 1, n_inputs=1)


def build_univariate_model(theta1, theta2) -> cir.Circuit:
    """3-qubit Hadamard-test circuit with expect_z0 = ½[Re v(θ1) + Re v(θ2)].

    The circuit is parametric: run it with params = concat(θ1, θ2).
    """
    t1, t2 = _angles_of(theta1), _angles_of(theta2)
    if t2.size != t1.size + 1:
        raise ValueError("angle lengths must be (L, L+1)")
    return univariate_model_circuit(t1.size)


def rank1_circuit_template(D: int, L: int) -> cir.Circuit:
    """Parametric Hadamard-test circuit of width 2D+1; slots var-major (2L+1 each)."""
    gates = [cir.h(q) for q in range(2 * D + 1)]
    for j in range(D):
        parity, target = 1 + 2 * j, 2 + 2 * j
        base = j * (2 * L + 1)
        gates += _chain_gates(target, _param_exprs(base, L), j, ((0, 1), (parity, 0)))
        gates += _chain_gates(target, _param_exprs(base + L, L + 1), j, ((0, 1), (parity, 1)))
    gates.append(cir.h(0))
    return cir.Circuit(2 * D + 1, tuple(gates), n_params=(2 * L + 1) * D, n_inputs=D)


def build_rank1_circuit(angle_pairs) -> cir.Circuit:
    """Rank-1 TD circuit; expect_z0 = Re ∏_j ½(v(θ1ⱼ,xⱼ) + v(θ2ⱼ,xⱼ)).

    Parametric: run with params = concat over variables of (θ1ⱼ, θ2ⱼ).
    """
    pairs = [(_angles_of(a), _angles_of(b)) for a, b in angle_pairs]
    if not pairs:
        raise ValueError("need at least one variable")
    L = pairs[0][0].size
    for t1, t2 in pairs:
        if t1.size != L or t2.size != L + 1:
            raise ValueError("angle lengths must be (L, L+1) for every variable")
    return rank1_circuit_template(len(pairs), L)


def rank1_params(angle_pairs) -> np.ndarray:
    """Flatten per-variable (θ1, θ2) pairs into the rank-1 circuit's layout."""
    return np.concatenate([
        np.concatenate([_angles_of(a), _angles_of(b)]) for a, b in angle_pairs
    ])


def _ancilla_bits(i: int, qubits: tuple[int, ...]) -> tuple[tuple[int, int], ...]:
    a = len(qubits)
    return tuple((qubits[k], (i >> (a - 1 - k)) & 1) for k in range(a))


def build_lcu_multivariate(monomials: MonomialList, D: int, L: int, seed: int = 0
                           ) -> tuple[cir.Circuit, float]:
    """LCU circuit over monomial blocks; expect_z0 = p(x)/Λ with Λ = T·‖c‖_∞.

    When the monomial list is the full (L+1)^D grid this Λ coincides with
    ‖c‖_∞·(L+1)^D.  Angles are synthesized and bound as constants.
    """
    t_count = len(monomials.entries)
    if t_count < 1:
        raise ValueError("need at least one monomial")
    for n, _ in monomials.entries:
        if len(n) != D or any(not 0 <= nj <= L for nj in n):
            raise ValueError(f"multi-index {n} outside [0, L]^{D}")
    c_inf = max(abs(c) for _, c in monomials.entries)
    if c_inf == 0:
        raise ValueError("all-zero coefficient list")
    lam = t_count * c_inf
    a = max(0, math.ceil(math.log2(t_count))) if t_count > 1 else 0
    width = 1 + a + D
    anc = tuple(range(1, 1 + a))
    sysq = tuple(range(1 + a, 1 + a + D))
    rng = np.random.default_rng(seed)

    gates: list[cir.Gate] = [cir.h(0)]
    if a:
        if t_count == 1 << a:
            gates += [cir.h(q) for q in anc]
        else:
            amps = np.zeros(1 << a)
            amps[:t_count] = 1.0 / math.sqrt(t_count)
            gates.append(cir.prepare_amplitudes(anc, amps))
    gates += [cir.h(q) for q in sysq]
    for i, (n, c) in enumerate(monomials.entries):
        ctl_anc = _ancilla_bits(i, anc)
        for j, nj in enumerate(n):
            coeffs = [0.0] * (nj + 1)
            coeffs[nj] = (c / c_inf) if j == 0 else 1.0
            theta = _synthesize_branch(UnivariatePoly(tuple(coeffs)), nj, rng)
            gates += _chain_gates(sysq[j], _const_exprs(theta), j, ((0, 1),) + ctl_anc)
    gates.append(cir.h(0))
    return cir.Circuit(width, tuple(gates), n_params=0, n_inputs=D), lam


def lcu_circuit_template(multi_indices, D: int, L: int) -> cir.Circuit:
    """Parametric structural twin of the LCU circuit, for resource audits."""
    t_count = len(multi_indices)
    a = max(0, math.ceil(math.log2(t_count))) if t_count > 1 else 0
    width = 1 + a + D
    anc = tuple(range(1, 1 + a))
    sysq = tuple(range(1 + a, 1 + a + D))
    gates: list[cir.Gate] = [cir.h(0)]
    if a:
        if t_count == 1 << a:
            gates += [cir.h(q) for q in anc]
        else:
            amps = np.zeros(1 << a)
            amps[:t_count] = 1.0 / math.sqrt(t_count)
            gates.append(cir.prepare_amplitudes(anc, amps))
    gates += [cir.h(q) for q in sysq]
    slot = 0
    for i, n in enumerate(multi_indices):
        ctl_anc = _ancilla_bits(i, anc)
        for j, nj in enumerate(n):
            gates += _chain_gates(sysq[j], _param_exprs(slot, nj + 1), j, ((0, 1),) + ctl_anc)
            slot += nj + 1
    gates.append(cir.h(0))
    return cir.Circuit(width, tuple(gates), n_params=slot, n_inputs=D)


def _td_layout(R: int, D: int) -> tuple[int, tuple[int, ...], list[tuple[int, int]]]:
    a = max(0, math.ceil(math.log2(R))) if R > 1 else 0
    anc = tuple(range(1, 1 + a))
    pairs = [(1 + a + 2 * j, 2 + a + 2 * j) for j in range(D)]
    return 1 + a + 2 * D, anc, pairs


def build_td_circuit(p: TdPoly, seed: int = 0) -> tuple[cir.Circuit, float]:
    """Tensor-decomposed circuit (ancilla-weighted LCU of rank-1 blocks).

    expect_z0 = p(x)/Λ with Λ = Σ_r |λ_r|; ancilla amplitudes are
    √(|λ_r|/Λ) and λ-signs are absorbed into each term's first factor.
    Angles are synthesized and bound as constants.
    """
    lam_total = math.fsum(abs(l) for l in p.lambdas)
    if lam_total <= 0.0:
        raise ValueError("Λ = Σ|λ_r| must be positive")
    for row in p.factors:
        for poly in row:
            if poly.sup_norm_grid() > 0.5 + 1e-12:
                raise BoundError("factor sup-norm exceeds 1/2 on [-1, 1]")
    width, anc, pairs = _td_layout(p.R, p.D)
    gates: list[cir.Gate] = [cir.h(0)]
    if anc:
        amps = np.zeros(1 << len(anc))
        amps[: p.R] = np.sqrt(np.abs(np.asarray(p.lambdas)) / lam_total)
        gates.append(cir.prepare_amplitudes(anc, amps))
    for parity, target in pairs:
        gates += [cir.h(parity), cir.h(target)]
    for r in range(p.R):
        ctl_anc = _ancilla_bits(r, anc)
        for j in range(p.D):
            poly = p.factors[r][j]
            if p.lambdas[r] < 0 and j == 0:
                poly = UnivariatePoly(tuple(-c for c in poly.coeffs))
            theta1, theta2 = synthesize_angles(poly, p.L, seed=seed + 101 * r + j)
            parity, target = pairs[j]
            base_ctl = ((0, 1),) + ctl_anc
            gates += _chain_gates(target, _const_exprs(theta1.theta), j,
                                  base_ctl + ((parity, 0),))
            gates += _chain_gates(target, _const_exprs(theta2.theta), j,
                                  base_ctl + ((parity, 1),))
    gates.append(cir.h(0))
    return cir.Circuit(width, tuple(gates), n_params=0, n_inputs=p.D), lam_total


def td_circuit_template(R: int, D: int, L: int) -> cir.Circuit:
    """Parametric structural twin of the TD circuit: R·D·(2L+1) slots."""
    width, anc, pairs = _td_layout(R, D)
    gates: list[cir.Gate] = [cir.h(0)]
    if anc:
        amps = np.zeros(1 << len(anc))
        amps[:R] = 1.0 / math.sqrt(R)
        gates.append(cir.prepare_amplitudes(anc, amps))
    for parity, target in pairs:
        gates += [cir.h(parity), cir.h(target)]
    slot = 0
    for r in range(R):
        ctl_anc = _ancilla_bits(r, anc)
        for j in range(D):
            parity, target = pairs[j]
            base_ctl = ((0, 1),) + ctl_anc
            gates += _chain_gates(target, _param_exprs(slot, L), j, base_ctl + ((parity, 0),))
            gates += _chain_gates(target, _param_exprs(slot + L, L + 1), j,
                                  base_ctl + ((parity, 1),))
            slot += 2 * L + 1
    gates.append(cir.h(0))
    return cir.Circuit(width, tuple(gates), n_params=slot, n_inputs=D)


# ---------------------------------------------------------------------------
# serialization


def td_poly_to_json_dict(p: TdPoly) -> dict:
    return {
        "R": p.R,
        "D": p.D,
        "L": p.L,
        "lambdas": list(p.lambdas),
        "factors": [[list(poly.coeffs) for poly in row] for row in p.factors],
    }


def td_poly_from_json_dict(doc: dict) -> TdPoly:
    return TdPoly(
        R=doc["R"],
        D=doc["D"],
        L=doc["L"],
        lambdas=tuple(doc["lambdas"]),
        factors=tuple(
            tuple(UnivariatePoly(tuple(cs)) for cs in row) for row in doc["factors"]
        ),
    )


def monomials_to_json_dict(m: MonomialList) -> dict:
    return {"entries": [{"n": list(n), "c": c} for n, c in m.entries]}


def monomials_from_json_dict(doc: dict) -> MonomialList:
    return MonomialList(tuple((tuple(e["n"]), float(e["c"])) for e in doc["entries"]))
