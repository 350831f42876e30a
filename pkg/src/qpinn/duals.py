"""Second-order forward-mode scalars and derivative utilities.

A dual number here is a truncated Taylor triple (v, d1, d2) seeded in a
single direction: d1 and d2 are the first and second derivatives of the
value along that direction.  The triple helpers (`t_*`) operate on raw
(value, d1, d2) tuples whose components may be floats, complex numbers,
or numpy arrays; the :class:`Dual2` class wraps them with operators for
scalar use.  The simulator uses the raw triples directly on amplitude
arrays for speed.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError

Triple = tuple  # (v, d1, d2)


# ---------------------------------------------------------------------------
# raw triple arithmetic (value, first, second derivative)

def t_const(c) -> Triple:
    return (c, 0.0, 0.0)


def t_add(a: Triple, b: Triple) -> Triple:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def t_sub(a: Triple, b: Triple) -> Triple:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def t_neg(a: Triple) -> Triple:
    return (-a[0], -a[1], -a[2])


def t_mul(a: Triple, b: Triple) -> Triple:
    # (ab)'' = a''b + 2a'b' + ab''
    return (
        a[0] * b[0],
        a[1] * b[0] + a[0] * b[1],
        a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
    )


def t_scale(c, a: Triple) -> Triple:
    return (c * a[0], c * a[1], c * a[2])


def t_inv(b: Triple) -> Triple:
    v = 1.0 / b[0]
    d1 = -b[1] * v * v
    d2 = (2.0 * b[1] * b[1] - b[0] * b[2]) * v * v * v
    return (v, d1, d2)


def t_div(a: Triple, b: Triple) -> Triple:
    return t_mul(a, t_inv(b))


def t_cos(a: Triple) -> Triple:
    c, s = np.cos(a[0]), np.sin(a[0])
    return (c, -s * a[1], -s * a[2] - c * a[1] * a[1])


def t_sin(a: Triple) -> Triple:
    c, s = np.sin(a[0]), np.cos(a[0])
    return (c, s * a[1], s * a[2] - c * a[1] * a[1])


def t_exp(a: Triple) -> Triple:
    e = np.exp(a[0])
    return (e, e * a[1], e * (a[2] + a[1] * a[1]))


def t_expj(a: Triple) -> Triple:
    """exp(i·a) for a real triple; result is a complex triple."""
    e = np.exp(1j * np.asarray(a[0], dtype=float))
    d1 = 1j * a[1] * e
    return (e, d1, e * (1j * a[2] - a[1] * a[1]))


def t_sqrt(a: Triple) -> Triple:
    r = np.sqrt(a[0])
    d1 = a[1] / (2.0 * r)
    d2 = a[2] / (2.0 * r) - a[1] * a[1] / (4.0 * r * r * r)
    return (r, d1, d2)


def t_arccos(a: Triple) -> Triple:
    v = np.asarray(a[0], dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise DomainError("arccos of a dual requires |value| < 1")
    s = 1.0 - v * v
    root = np.sqrt(s)
    d1 = -a[1] / root
    d2 = -a[2] / root - v * a[1] * a[1] / (s * root)
    return (np.arccos(v), d1, d2)


def t_tanh(a: Triple) -> Triple:
    y = np.tanh(a[0])
    sech2 = 1.0 - y * y
    return (y, sech2 * a[1], sech2 * a[2] - 2.0 * y * sech2 * a[1] * a[1])


def t_pow(a: Triple, p) -> Triple:
    v = a[0]
    y = v ** p
    d1 = p * v ** (p - 1) * a[1]
    d2 = p * (p - 1) * v ** (p - 2) * a[1] * a[1] + p * v ** (p - 1) * a[2]
    return (y, d1, d2)


# ---------------------------------------------------------------------------
# scalar wrapper

@dataclass(frozen=True)
class Dual2:
    """A value with first and second derivatives in one seeded direction."""

    v: float
    d1: float = 0.0
    d2: float = 0.0

    @staticmethod
    def seed(value: float) -> "Dual2":
        return Dual2(value, 1.0, 0.0)

    @staticmethod
    def lift(value) -> "Dual2":
        return value if isinstance(value, Dual2) else Dual2(value)

    def _triple(self) -> Triple:
        return (self.v, self.d1, self.d2)

    def __add__(self, other):
        return Dual2(*t_add(self._triple(), Dual2.lift(other)._triple()))

    __radd__ = __add__

    def __sub__(self, other):
        return Dual2(*t_sub(self._triple(), Dual2.lift(other)._triple()))

    def __rsub__(self, other):
        return Dual2(*t_sub(Dual2.lift(other)._triple(), self._triple()))

    def __mul__(self, other):
        return Dual2(*t_mul(self._triple(), Dual2.lift(other)._triple()))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Dual2.lift(other)
        if other.v == 0:
            raise DomainError("division by a dual with zero value")
        return Dual2(*t_div(self._triple(), other._triple()))

    def __rtruediv__(self, other):
        if self.v == 0:
            raise DomainError("division by a dual with zero value")
        return Dual2(*t_div(Dual2.lift(other)._triple(), self._triple()))

    def __neg__(self):
        return Dual2(-self.v, -self.d1, -self.d2)

    def __pow__(self, p):
        return Dual2(*t_pow(self._triple(), p))


def cos(a: Dual2) -> Dual2:
    return Dual2(*t_cos(a._triple()))


def sin(a: Dual2) -> Dual2:
    return Dual2(*t_sin(a._triple()))


def arccos(a: Dual2) -> Dual2:
    return Dual2(*t_arccos(a._triple()))


def sqrt(a: Dual2) -> Dual2:
    if a.v <= 0:
        raise DomainError("sqrt of a dual requires value > 0")
    return Dual2(*t_sqrt(a._triple()))


def exp(a: Dual2) -> Dual2:
    return Dual2(*t_exp(a._triple()))


def tanh(a: Dual2) -> Dual2:
    return Dual2(*t_tanh(a._triple()))


def derive2(f, point: float, *fixed) -> tuple[float, float, float]:
    """Value and first two derivatives of ``f`` at ``point``.

    ``f`` is called with a seeded :class:`Dual2` followed by any fixed
    arguments; it must be composed of supported primitives.
    """
    out = f(Dual2.seed(float(point)), *fixed)
    out = Dual2.lift(out)
    return (out.v, out.d1, out.d2)


def fd_gradient(loss, params: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h·max(1, |θᵢ|)."""
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for i in range(params.size):
        hi = h * max(1.0, abs(params[i]))
        up = params.copy()
        up[i] += hi
        dn = params.copy()
        dn[i] -= hi
        grad[i] = (loss(up) - loss(dn)) / (2.0 * hi)
    return grad


def parameter_shift(circuit, params, inputs, param_index: int) -> float:
    """Exact rotation-angle derivative of expect_z0∘run by shifted evaluations.

    Controlled rotations make the expectation a trigonometric polynomial with
    frequencies {½, 1} in each angle (in a Hadamard-test circuit the angle
    enters linearly as e^{±iθ/2}), so the exact rule is the four-term shift

        f'(θ) = c₊[f(θ+π/2) − f(θ−π/2)] − c₋[f(θ+3π/2) − f(θ−3π/2)],

    with c± = (√2±1)/(4√2); for uncontrolled gates it reduces to the familiar
    ½[f(θ+π/2) − f(θ−π/2)].  Parameters appearing in several gates sum the
    single-occurrence rule over all occurrences.
    """
    from . import circuits as cir
    from . import sim

    params = np.asarray(params, dtype=float)
    if not 0 <= param_index < circuit.n_params:
        raise IndexError(f"parameter index {param_index} out of range")

    root2 = math.sqrt(2.0)
    coeffs = ((math.pi / 2.0, (root2 + 1.0) / (4.0 * root2)),
              (3.0 * math.pi / 2.0, -(root2 - 1.0) / (4.0 * root2)))
    occurrences = _param_occurrences(circuit.gates, param_index)
    total = 0.0
    for path, scale, offset in occurrences:
        phi0 = scale * params[param_index] + offset
        for shift, coeff in coeffs:
            for sign in (+1.0, -1.0):
                shifted = _replace_angle(circuit, path, cir.Const(phi0 + sign * shift))
                val = sim.expect_z0(sim.run(shifted, params, inputs))
                total += scale * sign * coeff * val
    return total


def _param_occurrences(gates, index, prefix=()):
    from .circuits import Param

    found = []
    for i, g in enumerate(gates):
        path = prefix + (i,)
        if g.kind == "controlled":
            found.extend(_param_occurrences((g.inner,), index, path))
        elif isinstance(g.angle, Param) and g.angle.index == index:
            found.append((path, g.angle.scale, g.angle.offset))
    return found


def _replace_angle(circuit, path, new_angle):
    from dataclasses import replace

    def rebuild(gate, rest):
        if not rest:
            return replace(gate, angle=new_angle)
        return replace(gate, inner=rebuild(gate.inner, rest[1:]))

    gates = list(circuit.gates)
    i = path[0]
    gates[i] = rebuild(gates[i], path[1:])
    from dataclasses import replace as _rep

    return _rep(circuit, gates=tuple(gates))
