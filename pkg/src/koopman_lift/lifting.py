"""Observable dictionaries for Koopman lifting.

A dictionary maps an m-dimensional measurement vector y to a lifted vector

    psi(y) = [1, y_1, ..., y_m, g_1(y), ..., g_q(y)]

whose leading block is affine (constant plus raw measurements) and whose
nonlinear block depends on the dictionary kind:

* ``augsill``    -- conjunctive logistic functions followed by conjunctive RBFs
* ``sill``       -- conjunctive logistic functions only
* ``summedrbf``  -- per-term averages of one-dimensional RBF bumps
* ``legendre``   -- products of Legendre polynomials over graded multi-indices
* ``hermite``    -- products of probabilists' Hermite polynomials, same indices

The conjunctive families are parameterized per dimension by a center ``mu``
and a steepness ``alpha``; measurement gradients and parameter Jacobians are
available in closed form so the dictionaries can be trained by gradient
descent.  Polynomial kinds carry no trainable parameters; their nonlinear
block is evaluated on an affine per-dimension rescaling of the measurements
onto [-1, 1] (the ``poly_domain`` box) so that high-degree terms stay O(1) on
bounded trajectory data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Exponent arguments are clamped here before exponentiation: evaluations
# saturate instead of overflowing and never produce NaN for finite inputs.
EXP_CLAMP = 500.0

KINDS = ("augsill", "sill", "summedrbf", "legendre", "hermite")
PARAMETRIC_KINDS = ("augsill", "sill", "summedrbf")
POLYNOMIAL_KINDS = ("legendre", "hermite")


def _maybe_scalar(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


def logistic(y, mu=0.0, alpha=1.0):
    """Logistic sigmoid 1 / (1 + exp(-alpha * (y - mu))).

    Broadcasts like a numpy ufunc.  Overflow saturates to exactly 0.0 or 1.0;
    the result is never NaN for finite inputs.
    """
    z = np.clip(np.asarray(alpha, dtype=float) * (np.asarray(y, dtype=float) - mu),
                -EXP_CLAMP, EXP_CLAMP)
    e = np.exp(-np.abs(z))
    return _maybe_scalar(np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e)))


def rbf(y, mu=0.0, alpha=1.0):
    """Sigmoid-derived bump exp(-z) / (1 + exp(-z))^2 with z = alpha * (y - mu).

    Peaks at 1/4 when y == mu and decays to zero on both sides.  The formula
    is even in z, so it is evaluated through exp(-|z|) and cannot overflow.
    Identical (analytically) to logistic - logistic**2.
    """
    z = np.clip(np.asarray(alpha, dtype=float) * (np.asarray(y, dtype=float) - mu),
                -EXP_CLAMP, EXP_CLAMP)
    e = np.exp(-np.abs(z))
    return _maybe_scalar(e / (1.0 + e) ** 2)


@dataclass(eq=False)
class DictParams:
    """Center/steepness pair for one conjunctive term.

    Both arrays have length m (the measurement dimension).  ``alpha`` entries
    are expected positive; the evaluation functions do not enforce a sign.
    """

    mu: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if self.mu.ndim != 1 or self.alpha.ndim != 1 or self.mu.shape != self.alpha.shape:
            raise ValueError("mu and alpha must be 1-D arrays of identical length")

    @property
    def m(self) -> int:
        return self.mu.size

    def copy(self) -> "DictParams":
        return DictParams(self.mu.copy(), self.alpha.copy())


def _check_point(y, m: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (m,):
        raise ValueError(f"measurement has shape {y.shape}, expected ({m},)")
    return y


def conj_logistic(y, p: DictParams) -> float:
    """Product over dimensions of logistic factors; lies in (0, 1)."""
    y = _check_point(y, p.m)
    return float(np.prod(logistic(y, p.mu, p.alpha)))


def conj_rbf(y, p: DictParams) -> float:
    """Product over dimensions of RBF bumps; bounded by 4**-m, max at y == mu."""
    y = _check_point(y, p.m)
    return float(np.prod(rbf(y, p.mu, p.alpha)))


def grad_conj_logistic(y, p: DictParams) -> np.ndarray:
    """Measurement gradient of conj_logistic: alpha_i * (1 - lam_i) * product."""
    y = _check_point(y, p.m)
    lam = logistic(y, p.mu, p.alpha)
    return p.alpha * (1.0 - lam) * np.prod(lam)


def grad_conj_rbf(y, p: DictParams) -> np.ndarray:
    """Measurement gradient of conj_rbf: alpha_i * (1 - 2 lam_i) * product."""
    y = _check_point(y, p.m)
    lam = logistic(y, p.mu, p.alpha)
    return p.alpha * (1.0 - 2.0 * lam) * float(np.prod(rbf(y, p.mu, p.alpha)))


def product_limit_params(a: DictParams, b: DictParams) -> DictParams:
    """Parameters of the single conjunctive logistic that a product of two
    conjunctive logistics approaches as steepness grows.

    The center is the elementwise maximum of the two centers; each steepness
    entry is taken from whichever factor supplies that maximum (ties favor the
    second argument).
    """
    if a.m != b.m:
        raise ValueError("mismatched term dimensions")
    pick_b = b.mu >= a.mu
    return DictParams(np.where(pick_b, b.mu, a.mu), np.where(pick_b, b.alpha, a.alpha))


def graded_indices(m: int, count: int, min_degree: int = 2) -> list[tuple[int, ...]]:
    """First ``count`` multi-indices of total degree >= min_degree in graded
    lexicographic order: ascending total degree, lexicographic within a degree.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    out: list[tuple[int, ...]] = []
    degree = min_degree
    while len(out) < count:
        out.extend(_compositions(degree, m))
        degree += 1
    return out[:count]


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(eq=False)
class Dictionary:
    """An ordered family of observables.

    Output layout is [1, y_1..y_m, nonlinear terms].  For ``augsill`` the
    nonlinear block is all conjunctive logistic terms followed by all
    conjunctive RBF terms; ``sill`` holds only logistic terms and
    ``summedrbf`` keeps its averaged-RBF terms in ``rbf_terms``.  Polynomial
    kinds are defined by ``poly_degree_indices`` (each a length-m tuple with
    total degree >= 2) and an optional ``poly_domain`` box of shape (m, 2)
    mapped affinely onto [-1, 1] before polynomial evaluation.
    """

    kind: str
    m: int
    logistic_terms: list[DictParams] = field(default_factory=list)
    rbf_terms: list[DictParams] = field(default_factory=list)
    poly_degree_indices: list[tuple[int, ...]] = field(default_factory=list)
    poly_domain: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dictionary kind {self.kind!r}; valid: {KINDS}")
        if int(self.m) < 1:
            raise ValueError("measurement dimension must be >= 1")
        self.m = int(self.m)
        for t in list(self.logistic_terms) + list(self.rbf_terms):
            if t.m != self.m:
                raise ValueError("term dimension does not match dictionary dimension")
        if self.kind == "sill" and self.rbf_terms:
            raise ValueError("sill dictionaries carry no RBF terms")
        if self.kind == "summedrbf" and self.logistic_terms:
            raise ValueError("summedrbf dictionaries carry no logistic terms")
        if self.kind in PARAMETRIC_KINDS:
            if self.poly_degree_indices:
                raise ValueError("polynomial indices are invalid for parametric kinds")
            if self.poly_domain is not None:
                raise ValueError("poly_domain is only meaningful for polynomial kinds")
        else:
            if self.logistic_terms or self.rbf_terms:
                raise ValueError("parametric terms are invalid for polynomial kinds")
            cleaned = []
            for idx in self.poly_degree_indices:
                idx = tuple(int(a) for a in idx)
                if len(idx) != self.m or any(a < 0 for a in idx):
                    raise ValueError(f"bad multi-index {idx!r}")
                if sum(idx) < 2:
                    raise ValueError("multi-indices must have total degree >= 2")
                cleaned.append(idx)
            self.poly_degree_indices = cleaned
            if self.poly_domain is not None:
                box = np.asarray(self.poly_domain, dtype=float)
                if box.shape != (self.m, 2) or not np.all(np.isfinite(box)):
                    raise ValueError("poly_domain must be a finite (m, 2) box")
                if np.any(box[:, 1] <= box[:, 0]):
                    raise ValueError("poly_domain rows must satisfy lo < hi")
                self.poly_domain = box

    @property
    def n_logistic(self) -> int:
        return len(self.logistic_terms)

    @property
    def n_rbf(self) -> int:
        return len(self.rbf_terms)

    @property
    def n_out(self) -> int:
        if self.kind in PARAMETRIC_KINDS:
            return 1 + self.m + self.n_logistic + self.n_rbf
        return 1 + self.m + len(self.poly_degree_indices)

    @property
    def n_params(self) -> int:
        """Number of trainable dictionary parameters (centers + steepnesses)."""
        if self.kind in PARAMETRIC_KINDS:
            return 2 * self.m * (self.n_logistic + self.n_rbf)
        return 0

    def copy(self) -> "Dictionary":
        return Dictionary(
            kind=self.kind,
            m=self.m,
            logistic_terms=[t.copy() for t in self.logistic_terms],
            rbf_terms=[t.copy() for t in self.rbf_terms],
            poly_degree_indices=list(self.poly_degree_indices),
            poly_domain=None if self.poly_domain is None else self.poly_domain.copy(),
        )


def _stack_terms(terms: list[DictParams]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([t.mu for t in terms]), np.stack([t.alpha for t in terms])


def _poly_arguments(d: Dictionary, Y: np.ndarray) -> np.ndarray:
    if d.poly_domain is None:
        return Y
    lo = d.poly_domain[:, 0]
    hi = d.poly_domain[:, 1]
    return (2.0 * Y - (lo + hi)) / (hi - lo)


def _poly_table(kind: str, t: np.ndarray, dmax: int) -> np.ndarray:
    """Three-term-recurrence value table, shape t.shape + (dmax + 1,)."""
    out = np.empty(t.shape + (dmax + 1,))
    out[..., 0] = 1.0
    if dmax >= 1:
        out[..., 1] = t
    if kind == "legendre":
        for n in range(1, dmax):
            out[..., n + 1] = ((2 * n + 1) * t * out[..., n] - n * out[..., n - 1]) / (n + 1)
    else:
        for n in range(1, dmax):
            out[..., n + 1] = t * out[..., n] - n * out[..., n - 1]
    return out


def lift(d: Dictionary, y) -> np.ndarray:
    """Evaluate the dictionary at one measurement (m,) or a batch (B, m).

    Returns the lifted vector of length ``d.n_out`` (or a (B, n_out) array).
    Element 0 is exactly 1.0 and elements 1..m repeat the measurements
    bit-for-bit.
    """
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y2 = Y[None, :] if single else Y
    if Y2.ndim != 2 or Y2.shape[1] != d.m:
        raise ValueError(f"measurements have shape {Y.shape}, expected (..., {d.m})")
    B = Y2.shape[0]
    cols = [np.ones((B, 1)), Y2]
    if d.kind in ("augsill", "sill"):
        if d.logistic_terms:
            mus, alphas = _stack_terms(d.logistic_terms)
            lam = logistic(Y2[:, None, :], mus[None], alphas[None])
            cols.append(np.prod(lam, axis=2))
        if d.rbf_terms:
            mus, alphas = _stack_terms(d.rbf_terms)
            cols.append(np.prod(rbf(Y2[:, None, :], mus[None], alphas[None]), axis=2))
    elif d.kind == "summedrbf":
        if d.rbf_terms:
            mus, alphas = _stack_terms(d.rbf_terms)
            cols.append(np.mean(rbf(Y2[:, None, :], mus[None], alphas[None]), axis=2))
    else:
        if d.poly_degree_indices:
            T = _poly_arguments(d, Y2)
            idx = np.asarray(d.poly_degree_indices, dtype=int)
            table = _poly_table(d.kind, T, int(idx.max()))
            dims = np.broadcast_to(np.arange(d.m), idx.shape)
            cols.append(np.prod(table[:, dims, idx], axis=2))
    out = np.hstack(cols)
    return out[0] if single else out


def _param_grad_blocks(d: Dictionary, Y2: np.ndarray):
    """Batch derivative blocks of the lifted vector w.r.t. term parameters.

    Yields (rows, dmu, dalpha) per term group with dmu/dalpha of shape
    (B, n_terms, m); rows are the lifted-vector indices of the group's terms.
    """
    blocks = []
    base = 1 + d.m
    if d.kind in ("augsill", "sill") and d.logistic_terms:
        mus, alphas = _stack_terms(d.logistic_terms)
        lam = logistic(Y2[:, None, :], mus[None], alphas[None])
        val = np.prod(lam, axis=2)[:, :, None]
        one = 1.0 - lam
        dmu = -alphas[None] * one * val
        dalpha = (Y2[:, None, :] - mus[None]) * one * val
        rows = base + np.arange(len(d.logistic_terms))
        blocks.append((rows, dmu, dalpha))
        base += len(d.logistic_terms)
    if d.kind in ("augsill", "summedrbf") and d.rbf_terms:
        mus, alphas = _stack_terms(d.rbf_terms)
        lam = logistic(Y2[:, None, :], mus[None], alphas[None])
        rho = rbf(Y2[:, None, :], mus[None], alphas[None])
        flank = 1.0 - 2.0 * lam
        if d.kind == "augsill":
            val = np.prod(rho, axis=2)[:, :, None]
            dmu = -alphas[None] * flank * val
            dalpha = (Y2[:, None, :] - mus[None]) * flank * val
        else:
            dmu = -alphas[None] * rho * flank / d.m
            dalpha = (Y2[:, None, :] - mus[None]) * rho * flank / d.m
        rows = base + np.arange(len(d.rbf_terms))
        blocks.append((rows, dmu, dalpha))
    return blocks


def param_jacobian(d: Dictionary, y) -> np.ndarray:
    """Jacobian of the lifted vector with respect to all term parameters.

    Shape (n_out, 2 * m * n_terms).  Column order: per term (logistic terms
    first, then RBF terms), the m center entries followed by the m steepness
    entries.  The affine rows are identically zero, and each term's row only
    responds to its own parameters.
    """
    if d.kind not in PARAMETRIC_KINDS:
        raise ValueError(f"parameter jacobian undefined for kind {d.kind!r}")
    y = _check_point(y, d.m)
    J = np.zeros((d.n_out, d.n_params))
    col = 0
    for rows, dmu, dalpha in _param_grad_blocks(d, y[None, :]):
        for k, row in enumerate(rows):
            J[row, col:col + d.m] = dmu[0, k]
            J[row, col + d.m:col + 2 * d.m] = dalpha[0, k]
            col += 2 * d.m
    return J


def make_dictionary(kind: str, m: int, n_out: int, *, rng=None, data=None,
                    alpha_init: float = 1.0, poly_domain: str = "fit") -> Dictionary:
    """Build a dictionary of total output dimension ``n_out``.

    Parametric kinds draw centers uniformly from the per-dimension data range
    (default box [-1, 1]^m when no data is given) and set every steepness to
    ``alpha_init``; augsill splits its nonlinear budget as evenly as possible,
    logistic terms first.  Polynomial kinds take the first ``n_out - 1 - m``
    graded multi-indices; ``poly_domain="fit"`` maps the data range onto
    [-1, 1] before evaluation while ``"raw"`` evaluates unscaled arguments.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown dictionary kind {kind!r}; valid: {KINDS}")
    if poly_domain not in ("fit", "raw"):
        raise ValueError('poly_domain must be "fit" or "raw"')
    q = n_out - 1 - m
    if q < 0:
        raise ValueError("n_out must be at least 1 + m")
    if data is not None:
        data = np.asarray(data, dtype=float)
        lo, hi = data.min(axis=0), data.max(axis=0)
        flat = hi - lo < 1e-9
        lo = np.where(flat, lo - 0.5, lo)
        hi = np.where(flat, hi + 0.5, hi)
    else:
        lo, hi = -np.ones(m), np.ones(m)
    if kind in POLYNOMIAL_KINDS:
        box = None if poly_domain == "raw" else np.column_stack([lo, hi])
        return Dictionary(kind=kind, m=m, poly_degree_indices=graded_indices(m, q),
                          poly_domain=box)
    rng = np.random.default_rng(0) if rng is None else rng
    def draw():
        return DictParams(rng.uniform(lo, hi), np.full(m, float(alpha_init)))
    if kind == "sill":
        n_log, n_rbf = q, 0
    elif kind == "summedrbf":
        n_log, n_rbf = 0, q
    else:
        n_log = (q + 1) // 2
        n_rbf = q - n_log
    log_terms = [draw() for _ in range(n_log)]
    rbf_terms = [draw() for _ in range(n_rbf)]
    return Dictionary(kind=kind, m=m, logistic_terms=log_terms, rbf_terms=rbf_terms)


def dictionary_to_obj(d: Dictionary) -> dict:
    """Plain-JSON representation; floats survive a round trip bit-for-bit."""
    obj = {
        "kind": d.kind,
        "m": d.m,
        "logistic_terms": [{"mu": [float(v) for v in t.mu],
                            "alpha": [float(v) for v in t.alpha]} for t in d.logistic_terms],
        "rbf_terms": [{"mu": [float(v) for v in t.mu],
                       "alpha": [float(v) for v in t.alpha]} for t in d.rbf_terms],
        "poly_degree_indices": [list(idx) for idx in d.poly_degree_indices],
    }
    if d.poly_domain is not None:
        obj["poly_domain"] = [[float(a), float(b)] for a, b in d.poly_domain]
    return obj


def dictionary_from_obj(obj: dict) -> Dictionary:
    return Dictionary(
        kind=obj["kind"],
        m=int(obj["m"]),
        logistic_terms=[DictParams(t["mu"], t["alpha"]) for t in obj.get("logistic_terms", [])],
        rbf_terms=[DictParams(t["mu"], t["alpha"]) for t in obj.get("rbf_terms", [])],
        poly_degree_indices=[tuple(i) for i in obj.get("poly_degree_indices", [])],
        poly_domain=obj.get("poly_domain"),
    )


def save_dictionary(d: Dictionary, path) -> None:
    with open(path, "w") as fh:
        json.dump(dictionary_to_obj(d), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dictionary(path) -> Dictionary:
    with open(path) as fh:
        return dictionary_from_obj(json.load(fh))
