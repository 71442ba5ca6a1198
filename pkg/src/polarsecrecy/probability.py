"""
Finite-alphabet probability machinery.

Distributions are plain numpy arrays wrapped in small frozen containers that
validate once on construction. Entropies are in bits.
"""

from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12
LOAD_TOL = 1e-6
INEQ_TOL = 1e-9


class ValidationError(ValueError):
    """A distribution or channel table violates its invariants."""


class UnsupportedAlphabet(ValueError):
    """The operation is only defined for binary input alphabets."""


def _normalized(arr, axis=None, what="distribution"):
    arr = np.array(arr, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError(f"{what} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{what} has negative entries")
    s = arr.sum(axis=axis, keepdims=axis is not None)
    if np.any(np.abs(s - 1.0) > LOAD_TOL):
        raise ValidationError(f"{what} does not sum to 1 (got {np.ravel(s)[:4]})")
    return arr / s


@dataclass(frozen=True)
class Pmf:
    """Probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = _normalized(self.probs, what="Pmf")
        if p.ndim != 1:
            raise ValidationError("Pmf must be one-dimensional")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def bernoulli(cls, p1):
        return cls(np.array([1.0 - p1, p1]))

    @classmethod
    def uniform(cls, size):
        return cls(np.full(size, 1.0 / size))

    def __len__(self):
        return len(self.probs)


def _as_probs(p):
    if isinstance(p, Pmf):
        return p.probs
    return Pmf(p).probs


def _h(arr):
    arr = np.asarray(arr, dtype=np.float64).ravel()
    nz = arr[arr > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(p):
    """Shannon entropy ``H(p)`` in bits, with ``0 log 0 = 0``."""
    return _h(_as_probs(p))


def binary_entropy(p):
    return _h([p, 1.0 - p])


def joint_entropy(joint):
    return _h(_normalized(joint, what="joint"))


def conditional_entropy(joint):
    """``H(A|B)`` for a 2-D joint table indexed ``(a, b)``."""
    j = _normalized(joint, what="joint")
    if j.ndim != 2:
        raise ValidationError("conditional_entropy expects a 2-D joint")
    return max(0.0, _h(j) - _h(j.sum(axis=0)))


def mutual_information(joint):
    """``I(A;B)`` for a 2-D joint table."""
    j = _normalized(joint, what="joint")
    return max(0.0, _h(j.sum(axis=1)) + _h(j.sum(axis=0)) - _h(j))


def variational_distance(p, q):
    """``delta(P, Q) = 1/2 sum |P - Q|``."""
    a, b = _as_probs(p), _as_probs(q)
    if a.shape != b.shape:
        raise ValidationError(f"alphabet mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def l1_distance(p, q):
    """Unnormalized ``||P - Q||_1 = 2 delta(P, Q)``."""
    return 2.0 * variational_distance(p, q)


@dataclass(frozen=True)
class WiretapSource:
    """Joint distribution ``P(x, y, z)`` over finite alphabets."""

    joint: np.ndarray

    def __post_init__(self):
        j = _normalized(self.joint, what="WiretapSource joint")
        if j.ndim != 3:
            raise ValidationError("WiretapSource joint must be 3-D (x, y, z)")
        j.setflags(write=False)
        object.__setattr__(self, "joint", j)

    @property
    def sizes(self):
        return self.joint.shape

    @property
    def p_x(self):
        return self.joint.sum(axis=(1, 2))

    @property
    def p_xy(self):
        return self.joint.sum(axis=2)

    @property
    def p_xz(self):
        return self.joint.sum(axis=1)

    def project(self, side):
        """2-D joint of ``X`` with ``side`` in {'y', 'z'}."""
        if side == "y":
            return self.p_xy
        if side == "z":
            return self.p_xz
        raise ValueError(f"side must be 'y' or 'z', got {side!r}")

    def h_x_given(self, side):
        return conditional_entropy(self.project(side))

    def channel(self):
        """Induced wiretap channel ``P(y, z | x)`` with the source's input law."""
        px = self.p_x
        w = np.zeros_like(self.joint)
        keep = px > 0
        w[keep] = self.joint[keep] / px[keep, None, None]
        # rows of zero-probability inputs are irrelevant; make them valid
        w[~keep] = 1.0 / (w.shape[1] * w.shape[2])
        return WiretapChannel(w, Pmf(px))


@dataclass(frozen=True)
class WiretapChannel:
    """Transition table ``P(y, z | x)`` with shape (|X|, |Y|, |Z|) and an input law."""

    transition: np.ndarray
    input: Pmf

    def __post_init__(self):
        w = _normalized(self.transition, axis=(1, 2), what="WiretapChannel rows")
        if w.ndim != 3:
            raise ValidationError("transition must be 3-D (x, y, z)")
        w.setflags(write=False)
        object.__setattr__(self, "transition", w)
        inp = self.input if isinstance(self.input, Pmf) else Pmf(self.input)
        if len(inp) != w.shape[0]:
            raise ValidationError("input distribution size does not match |X|")
        object.__setattr__(self, "input", inp)

    def source(self, p_x=None):
        px = self.input.probs if p_x is None else _as_probs(p_x)
        return WiretapSource(px[:, None, None] * self.transition)

    @property
    def w_y(self):
        return self.transition.sum(axis=2)

    @property
    def w_z(self):
        return self.transition.sum(axis=1)

    def with_input(self, p_x):
        return WiretapChannel(self.transition, Pmf(_as_probs(p_x)))


@dataclass(frozen=True)
class MarkovTriple:
    """Factors of a chain ``U - X - (Y, Z)``.

    ``p_u_given_x`` has shape (|X|, |U|), ``p_yz_given_x`` (|X|, |Y|, |Z|).
    """

    p_u_given_x: np.ndarray
    p_x: np.ndarray
    p_yz_given_x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_u_given_x",
                           _normalized(self.p_u_given_x, axis=1, what="P(u|x)"))
        object.__setattr__(self, "p_x", _normalized(self.p_x, what="P(x)"))
        object.__setattr__(self, "p_yz_given_x",
                           _normalized(self.p_yz_given_x, axis=(1, 2), what="P(y,z|x)"))
        nx = len(self.p_x)
        if self.p_u_given_x.shape[0] != nx or self.p_yz_given_x.shape[0] != nx:
            raise ValidationError("MarkovTriple factors disagree on |X|")

    def joint(self):
        """``P(u, x, y, z)``."""
        return np.einsum("x,xu,xyz->uxyz", self.p_x, self.p_u_given_x, self.p_yz_given_x)


# --- constructors -----------------------------------------------------------

def bsc(p):
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def bec(e):
    """Binary erasure channel; output symbol 2 is the erasure."""
    return np.array([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]])


def product_channel(w_y, w_z, p_x):
    """Y and Z produced independently from X."""
    w_y, w_z = np.asarray(w_y, float), np.asarray(w_z, float)
    return WiretapChannel(w_y[:, :, None] * w_z[:, None, :], Pmf(_as_probs(p_x)))


def degraded_channel(w_y, w_zy, p_x):
    """Z produced from Y, so ``X - Y - Z`` is a Markov chain."""
    w_y, w_zy = np.asarray(w_y, float), np.asarray(w_zy, float)
    return WiretapChannel(w_y[:, :, None] * w_zy[None, :, :], Pmf(_as_probs(p_x)))


def bsc_cascade(p1, p2, p_one=0.5):
    """``Y = BSC(p1)(X)``, ``Z = BSC(p2)(Y)``."""
    return degraded_channel(bsc(p1), bsc(p2), Pmf.bernoulli(p_one))


def bec_pair(e1, e2, p_one=0.5):
    """Independent erasures: ``Y = BEC(e1)(X)``, ``Z = BEC(e2)(X)``."""
    return product_channel(bec(e1), bec(e2), Pmf.bernoulli(p_one))


# --- channel classes (binary input) -----------------------------------------

def _mi_gap_curve(w, step):
    if w.transition.shape[0] != 2:
        raise UnsupportedAlphabet("channel-class predicates need |X| = 2")
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    px = np.stack([1.0 - grid, grid], axis=1)
    jy = px[:, :, None] * w.w_y[None]
    jz = px[:, :, None] * w.w_z[None]
    return grid, _mi_rows(jy) - _mi_rows(jz)


def _plogp(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, a * np.log2(np.where(a > 0, a, 1.0)), 0.0)


def _mi_rows(j):
    # j: (G, |X|, |S|), one joint per grid point
    hx = -_plogp(j.sum(axis=2)).sum(axis=1)
    hs = -_plogp(j.sum(axis=1)).sum(axis=1)
    hxs = -_plogp(j).sum(axis=(1, 2))
    return hx + hs - hxs


def is_more_capable(w, step=1e-3):
    """Grid test of ``I(X;Y) >= I(X;Z)`` for all binary input laws.

    Returns ``(holds, witness)`` where ``witness`` is the input Pmf minimizing
    ``I(X;Y) - I(X;Z)``.
    """
    grid, f = _mi_gap_curve(w, step)
    k = int(np.argmin(f))
    return bool(f[k] >= -INEQ_TOL), Pmf.bernoulli(grid[k])


def is_less_noisy(w, step=1e-3):
    """Less-noisy test for binary input via concavity of ``I(X;Y) - I(X;Z)``.

    Returns ``(holds, midpoint)``; ``midpoint`` is the input law at the worst
    convexity violation, or ``None`` when the curve is concave on the grid.
    """
    grid, f = _mi_gap_curve(w, step)
    second = f[:-2] + f[2:] - 2.0 * f[1:-1]
    k = int(np.argmax(second))
    if second[k] > INEQ_TOL:
        return False, Pmf.bernoulli(grid[k + 1])
    return True, None


def key_rate_less_noisy(s):
    """``H(X|Z) - H(X|Y)``; may be negative, callers clamp."""
    return s.h_x_given("z") - s.h_x_given("y")


def secrecy_capacity_more_capable(w, step=1e-3):
    """Grid maximum of ``H(X|Z) - H(X|Y)`` over binary input laws, clamped at 0."""
    grid, f = _mi_gap_curve(w, step)
    k = int(np.argmax(f))
    return max(0.0, float(f[k])), Pmf.bernoulli(grid[k])


def sample_source(s, n, rng):
    """``n`` i.i.d. draws ``(x, y, z)`` from the joint of ``s``."""
    if n == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e.copy(), e.copy()
    flat = s.joint.ravel()
    idx = rng.choice(flat.size, size=n, p=flat)
    x, y, z = np.unravel_index(idx, s.joint.shape)
    return x, y, z


@dataclass(frozen=True)
class SideInfoBound:
    holds: bool
    vacuous: bool
    h_u_given_y: float
    h_u_given_z: float
    h_x_given_y: float

    def __bool__(self):
        return self.holds


def lemma11_check(t, eps):
    """Check ``H(U|Y) <= H(U|Z) + eps`` given ``H(X|Y) <= eps``.

    When the hypothesis fails the result is flagged ``vacuous`` and passes.
    """
    j = t.joint()
    h_x_y = conditional_entropy(j.sum(axis=(0, 3)))
    h_u_y = conditional_entropy(j.sum(axis=(1, 3)))
    h_u_z = conditional_entropy(j.sum(axis=(1, 2)))
    if h_x_y > eps + INEQ_TOL:
        return SideInfoBound(True, True, h_u_y, h_u_z, h_x_y)
    return SideInfoBound(bool(h_u_y <= h_u_z + eps + INEQ_TOL), False, h_u_y, h_u_z, h_x_y)
