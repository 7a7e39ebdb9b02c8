"""Multiplier profiles on ``[0, inf)`` and their regularity norms.

All dyadic machinery here works with one fixed partition function ``omega``
(a normalised ``exp(-1/((x-1/4)(1-x)))`` bump), so Hoermander norms are
comparable across runs but not across choices of partition.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._validation import DomainError, ResolutionError, check_exponent, check_positive

PROFILE_FAMILIES = ("constant", "imaginary_power", "heat", "bochner_riesz",
                    "indicator", "dyadic_random", "tabulated", "callable")


# --------------------------------------------------------------------------
# partition of unity

def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0.25) & (x < 1.0)
    xi = x[inside]
    out[inside] = np.exp(-1.0 / ((xi - 0.25) * (1.0 - xi)))
    return out


@dataclass(frozen=True)
class PartitionFunction:
    """Dyadic partition ``omega`` with ``sum_n omega(2^-n x) = 1`` for ``x > 0``.

    ``omega = phi / sum_k phi(2^-k .)`` where ``phi`` is the smooth bump on
    ``(1/4, 1)``. The denominator is dilation invariant and strictly
    positive because consecutive dyadic dilates of ``(1/4, 1)`` overlap.
    """

    support: tuple = (0.25, 1.0)
    resolution: int = 4096

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        if xp.size:
            base = np.floor(np.log2(xp))
            denom = np.zeros_like(xp)
            for shift in range(-1, 4):
                denom += _bump(xp * 2.0 ** -(base + shift))
            out[pos] = _bump(xp) / denom
        return out[0] if scalar else out

    def dilates(self, x, n):
        """``omega(2^-n x)``."""
        return self(np.asarray(x, float) * 2.0 ** (-n))


def make_partition():
    return PartitionFunction()


OMEGA = make_partition()


# --------------------------------------------------------------------------
# profiles

@dataclass(frozen=True, eq=False)
class MultiplierProfile:
    """A bounded Borel function ``F: [0, inf) -> C`` given declaratively.

    ``value_at_zero`` is carried explicitly and returned at ``lam = 0``.
    Negative arguments evaluate to 0 (the profile is extended by zero),
    except for ``constant`` and ``callable`` which are defined on all of R.

    Families and their ``params``:

    ========================  ==============================================
    ``constant``              ``c``
    ``imaginary_power``       ``tau``  (``lam^(i tau)``)
    ``heat``                  ``t``    (``exp(-t lam)``)
    ``bochner_riesz``         ``delta``, ``Lambda``  (``(1 - lam/Lambda)_+^delta``)
    ``indicator``             ``a``, ``b``  (indicator of ``[a, b)``)
    ``dyadic_random``         ``seed``, ``smoothness``, ``n_min``, ``n_max``
    ``tabulated``             ``grid``, ``values``  (cubic interpolation)
    ``callable``              ``func``, ``sup``
    ========================  ==============================================
    """

    family: str
    params: dict = field(default_factory=dict)
    value_at_zero: complex = None

    def __post_init__(self):
        if self.family not in PROFILE_FAMILIES:
            raise ValueError(f"unknown profile family {self.family!r}")
        p = dict(self.params)
        if self.family == "tabulated":
            grid = np.asarray(p["grid"], dtype=float)
            values = np.asarray(p["values"], dtype=complex)
            if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
                raise ValueError("tabulated profile needs matching 1-d grid/values")
            if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
                raise ValueError("tabulated profile contains NaN or infinite samples")
            order = np.argsort(grid)
            grid, values = grid[order], values[order]
            if np.any(np.diff(grid) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            p["_spline_re"] = CubicSpline(grid, values.real)
            p["_spline_im"] = CubicSpline(grid, values.imag)
            p["grid"], p["values"] = grid, values
        if self.family == "dyadic_random":
            p.setdefault("seed", 0)
            p.setdefault("smoothness", 0.5)
            p.setdefault("n_min", -6)
            p.setdefault("n_max", 6)
            rng = np.random.default_rng(p["seed"])
            k = p["n_max"] - p["n_min"] + 1
            rho = float(p["smoothness"])
            xi = rng.uniform(-1.0, 1.0, size=k)
            c = np.empty(k)
            c[0] = xi[0]
            for i in range(1, k):
                c[i] = rho * c[i - 1] + math.sqrt(1.0 - rho ** 2) * xi[i]
            p["_coeffs"] = c
        object.__setattr__(self, "params", p)
        if self.value_at_zero is None:
            object.__setattr__(self, "value_at_zero", self._default_zero())

    def _default_zero(self):
        f, p = self.family, self.params
        if f == "constant":
            return complex(p["c"])
        if f in ("heat", "bochner_riesz"):
            return 1.0 + 0j
        if f == "indicator":
            return 1.0 + 0j if p["a"] <= 0 < p["b"] else 0j
        if f == "tabulated":
            return complex(self._tab(np.array([0.0]))[0]) if p["grid"][0] <= 0 else 0j
        if f == "callable":
            return complex(p["func"](np.array([0.0]))[0])
        return 0j

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c, value_at_zero=None):
        return cls("constant", {"c": c}, value_at_zero)

    @classmethod
    def imaginary_power(cls, tau, value_at_zero=None):
        return cls("imaginary_power", {"tau": float(tau)}, value_at_zero)

    @classmethod
    def heat(cls, t, value_at_zero=None):
        return cls("heat", {"t": float(t)}, value_at_zero)

    @classmethod
    def bochner_riesz(cls, delta, Lambda=1.0, value_at_zero=None):
        return cls("bochner_riesz", {"delta": float(delta), "Lambda": float(Lambda)},
                   value_at_zero)

    @classmethod
    def indicator(cls, a, b, value_at_zero=None):
        return cls("indicator", {"a": float(a), "b": float(b)}, value_at_zero)

    @classmethod
    def dyadic_random(cls, seed=0, smoothness=0.5, n_min=-6, n_max=6, value_at_zero=None):
        return cls("dyadic_random", {"seed": seed, "smoothness": smoothness,
                                     "n_min": n_min, "n_max": n_max}, value_at_zero)

    @classmethod
    def tabulated(cls, grid, values, value_at_zero=None):
        return cls("tabulated", {"grid": grid, "values": values}, value_at_zero)

    @classmethod
    def from_callable(cls, func, sup=None, value_at_zero=None, name="callable"):
        return cls("callable", {"func": func, "sup": sup, "name": name}, value_at_zero)

    @classmethod
    def from_csv(cls, path, value_at_zero=None):
        """Read a two-column CSV ``(lambda, value)``; values may be complex."""
        grid, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    lam = float(row[0])
                except ValueError:
                    continue  # header
                grid.append(lam)
                values.append(complex(row[1].strip().replace(" ", "")))
        return cls.tabulated(grid, values, value_at_zero)

    @classmethod
    def from_config(cls, spec):
        """Build from ``{family, params, value_at_zero}``."""
        spec = dict(spec)
        family = spec["family"]
        params = dict(spec.get("params", {}))
        if family == "tabulated" and "csv" in params:
            return cls.from_csv(params["csv"], spec.get("value_at_zero"))
        v0 = spec.get("value_at_zero")
        if isinstance(v0, dict):
            v0 = complex(v0.get("re", 0.0), v0.get("im", 0.0))
        return cls(family, params, v0)

    # -- evaluation -------------------------------------------------------
    def _tab(self, x):
        p = self.params
        if np.any(x < p["grid"][0] - 1e-12) or np.any(x > p["grid"][-1] + 1e-12):
            raise DomainError(
                f"tabulated profile defined on [{p['grid'][0]}, {p['grid'][-1]}], "
                f"evaluated at [{x.min()}, {x.max()}]")
        return p["_spline_re"](x) + 1j * p["_spline_im"](x)

    def _positive(self, x):
        f, p = self.family, self.params
        if f == "constant":
            return np.full(x.shape, complex(p["c"]))
        if f == "imaginary_power":
            return np.exp(1j * p["tau"] * np.log(x))
        if f == "heat":
            return np.exp(-p["t"] * x).astype(complex)
        if f == "bochner_riesz":
            return (np.clip(1.0 - x / p["Lambda"], 0.0, None) ** p["delta"]).astype(complex)
        if f == "indicator":
            return ((x >= p["a"]) & (x < p["b"])).astype(complex)
        if f == "dyadic_random":
            out = np.zeros(x.shape, dtype=complex)
            for c, n in zip(p["_coeffs"], range(p["n_min"], p["n_max"] + 1)):
                out += c * OMEGA(x * 2.0 ** (-n))
            return out
        if f == "tabulated":
            return self._tab(x)
        return np.asarray(p["func"](x), dtype=complex)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        scalar = lam.ndim == 0
        lam = np.atleast_1d(lam)
        out = np.zeros(lam.shape, dtype=complex)
        pos = lam > 0
        if np.any(pos):
            out[pos] = self._positive(lam[pos])
        out[lam == 0] = self.value_at_zero
        neg = lam < 0
        if np.any(neg) and self.family in ("constant", "callable"):
            out[neg] = self._positive(lam[neg])
        return out[0] if scalar else out

    def sup_bound(self):
        """A certified finite bound for ``sup |F|`` on ``[0, inf)``."""
        f, p = self.family, self.params
        v0 = abs(self.value_at_zero)
        if f == "constant":
            return max(abs(p["c"]), v0)
        if f in ("imaginary_power", "heat", "bochner_riesz", "indicator"):
            return max(1.0, v0)
        if f == "dyadic_random":
            c = np.abs(p["_coeffs"])
            # at most two partition pieces overlap at any point
            pair = np.max(c[:-1] + c[1:]) if c.size > 1 else c.max()
            return max(float(pair), v0)
        if f == "tabulated":
            x = np.linspace(p["grid"][0], p["grid"][-1], 64 * p["grid"].size)
            return max(float(np.abs(self._tab(x)).max()), v0)
        if p.get("sup") is not None:
            return max(float(p["sup"]), v0)
        x = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 20001)])
        return max(float(np.abs(self(x)).max()), v0)

    def describe(self):
        d = {k: v for k, v in self.params.items()
             if not k.startswith("_") and k != "func"}
        for k in ("grid", "values"):
            if k in d:
                d[k] = np.asarray(d[k]).tolist()
        return {"family": self.family, "params": d, "value_at_zero": self.value_at_zero}

    def scaled(self, c):
        """The profile ``c * F``."""
        return MultiplierProfile.from_callable(lambda x, F=self: c * F(x),
                                               sup=abs(c) * self.sup_bound(),
                                               value_at_zero=c * self.value_at_zero)


def as_function(F):
    """Return a vectorised complex evaluator for a profile or plain callable."""
    if isinstance(F, MultiplierProfile):
        return F
    return lambda x: np.asarray(F(np.asarray(x, float)), dtype=complex) * np.ones(np.shape(x))


# --------------------------------------------------------------------------
# sampled profiles and norms

@dataclass
class SampledProfile:
    """Uniform samples of a function on ``[a, b]``.

    If ``support`` is given the samples must vanish at and beyond it.
    """

    x: np.ndarray
    values: np.ndarray
    support: tuple = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.x.ndim != 1 or self.x.shape != self.values.shape or self.x.size < 2:
            raise ValueError("x and values must be matching 1-d arrays")
        h = np.diff(self.x)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")
        if self.support is not None:
            a, b = self.support
            outside = (self.x <= a) | (self.x >= b)
            scale = max(1.0, float(np.abs(self.values).max()))
            if np.any(np.abs(self.values[outside]) > 1e-12 * scale):
                raise ValueError("samples must vanish at and beyond the declared support")

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @classmethod
    def sample(cls, func, a, b, n=4096, support=None):
        """Sample ``func`` at ``n + 1`` equispaced points of ``[a, b]``."""
        x = np.linspace(a, b, n + 1)
        return cls(x, func(x), support)

    def decimated(self):
        """Every other sample (half resolution); keeps both endpoints."""
        if (self.x.size - 1) % 2:
            raise ResolutionError("self-check needs an even number of intervals")
        return SampledProfile(self.x[::2], self.values[::2], self.support)


def _bessel_raw(g, s, q, pad=8):
    n = g.values.size
    N = pad * n
    G = np.fft.fft(g.values, N)
    xi = 2.0 * np.pi * np.fft.fftfreq(N, d=g.h)
    if q == 2:
        # unitary transform: ghat = h / sqrt(2 pi) * DFT, d xi = 2 pi / (N h)
        dens = (1.0 + xi ** 2) ** s * np.abs(G) ** 2
        return float(math.sqrt(g.h / N * dens.sum()))
    u = np.fft.ifft(G * (1.0 + xi ** 2) ** (s / 2.0))
    return float((g.h * np.sum(np.abs(u) ** q)) ** (1.0 / q))


def bessel_norm(g, s, q=2, pad=8, self_check=True, tol=0.01):
    """Bessel potential norm ``||g||_{H^s_q}`` of a compactly supported sample.

    ``q = 2`` uses ``(int (1 + xi^2)^s |ghat|^2 dxi)^(1/2)`` with the unitary
    Fourier transform; ``2 < q < inf`` takes the ``L^q`` norm of the inverse
    transform of ``(1 + xi^2)^(s/2) ghat``; ``q = inf`` is :func:`holder_norm`.
    With ``self_check`` the value is recomputed at half resolution and a
    relative change above ``tol`` raises :class:`ResolutionError`.
    """
    q = check_exponent(q, "q")
    if q <= 1:
        raise ValueError(f"q must be > 1, got {q}")
    check_positive(s, "s", strict=False)
    if q == np.inf:
        return holder_norm(g, s)
    if not np.any(g.values):
        return 0.0
    val = _bessel_raw(g, s, q, pad)
    if self_check:
        coarse = _bessel_raw(g.decimated(), s, q, pad)
        if abs(val - coarse) > tol * abs(val):
            raise ResolutionError(
                f"H^{s}_{q} norm not resolved: {coarse:.6g} (h) vs {val:.6g} (h/2)")
    return val


def _holder_seminorm(x, v, alpha, chunk=256):
    best = 0.0
    n = x.size
    for i in range(0, n, chunk):
        xi, vi = x[i:i + chunk, None], v[i:i + chunk, None]
        dx = np.abs(xi - x[None, :])
        dv = np.abs(vi - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dx > 0, dv / dx ** alpha, 0.0)
        best = max(best, float(r.max()))
    return best


def holder_norm(g, s):
    """Hoelder norm ``||g||_{C^s}`` over grid pairs.

    For ``s < 1``: ``sup|g| + sup_{x != y} |g(x) - g(y)| / |x - y|^s``. For
    ``s >= 1`` the sup norms of central-difference derivatives up to order
    ``floor(s)`` are added, plus the fractional seminorm of the top
    derivative when ``s`` is not an integer. Difference quotients carry an
    ``O(h)`` bias.
    """
    check_positive(s, "s", strict=False)
    x, v = g.x, g.values
    if not np.any(v):
        return 0.0
    k = int(math.floor(s))
    frac = s - k
    total = float(np.abs(v).max())
    deriv = v
    for _ in range(k):
        deriv = np.gradient(deriv, g.h)
        total += float(np.abs(deriv).max())
    if frac > 0 or k == 0:
        total += _holder_seminorm(x, deriv, frac)
    return total


def dilated_piece(F, n, resolution=4096, shift_zero=False):
    """Sample ``omega * F(2^n .)`` on ``[1/4, 1]``."""
    f = as_function(F)
    v0 = F.value_at_zero if (shift_zero and isinstance(F, MultiplierProfile)) else 0.0

    def func(x):
        return OMEGA(x) * (f(2.0 ** n * x) - v0)

    return SampledProfile.sample(func, 0.25, 1.0, resolution, support=(0.25, 1.0))


def hoermander_pieces(F, s, q=2, n_values=(0,), resolution=4096):
    """Per-``n`` norms ``||omega F(2^n .)||_{H^s_q}``."""
    return np.array([bessel_norm(dilated_piece(F, n, resolution), s, q)
                     for n in n_values])


def hoermander_norm(F, s, q=2, n_range=None, resolution=None, cap=60,
                    return_details=False):
    """``sup_n ||omega F(2^n .)||_{H^s_q}`` with automatic range extension.

    Starting from ``n_range`` (default ``[-8, 8]``) each end is extended
    until its two outermost terms are below ``1e-10`` of the running max or
    have become stationary (relative change below ``1e-9``, e.g. dilation
    invariant families). Extension stops at ``|n| = cap`` with a warning.
    """
    q = check_exponent(q, "q")
    if resolution is None:
        resolution = 1024 if q == np.inf else 4096
    lo, hi = (-8, 8) if n_range is None else (int(n_range[0]), int(n_range[1]))
    norms = {n: float(hoermander_pieces(F, s, q, [n], resolution)[0])
             for n in range(lo, hi + 1)}
    capped = False
    if n_range is None:
        for step in (-1, 1):
            while True:
                end = lo if step < 0 else hi
                a, b = norms[end], norms[end - step]
                run = max(norms.values())
                small = run == 0 or (a <= 1e-10 * run and b <= 1e-10 * run)
                c = norms[end - 2 * step] if (end - 2 * step) in norms else b
                flat = run > 0 and abs(a - b) <= 1e-9 * run and abs(b - c) <= 1e-9 * run
                if small or flat:
                    break
                if abs(end) >= cap:
                    capped = True
                    break
                nxt = end + step
                norms[nxt] = float(hoermander_pieces(F, s, q, [nxt], resolution)[0])
                if step < 0:
                    lo = nxt
                else:
                    hi = nxt
    if capped:
        warnings.warn(f"hoermander_norm reached |n| = {cap}; returning partial sup",
                      RuntimeWarning)
    n_star = max(norms, key=norms.get)
    value = norms[n_star]
    if return_details:
        return value, {"argmax_n": n_star, "n_range": (lo, hi), "capped": capped,
                       "pieces": dict(sorted(norms.items()))}
    return value


def _cell_sup(f, left, right, samples, monotone=False):
    eps = 1e-12 * (right - left)
    if monotone:
        pts = np.array([left, right - eps])
    else:
        pts = np.concatenate([np.linspace(left, right, samples, endpoint=False),
                              [right - eps]])
    return float(np.abs(f(pts)).max())


def nq_norm(F, N, q, samples_per_cell=64):
    """``((1/N) sum_{k=1-N}^{2N} sup_{[(k-1)/N, k/N)} |F|^q)^(1/q)``.

    ``F`` lives on ``[-1, 2]``; profiles are extended by zero below 0. Cell
    sups are taken on dense samples plus the right endpoint approached from
    the left (the cells are half-open).
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    q = check_exponent(q, "q")
    if q == np.inf:
        raise ValueError("q must be finite")
    N = int(N)
    f = as_function(F)
    monotone = isinstance(F, MultiplierProfile) and F.family in ("constant", "heat")
    total = 0.0
    for k in range(1 - N, 2 * N + 1):
        left, right = (k - 1) / N, k / N
        mono = monotone and left >= 0
        total += _cell_sup(f, left, right, samples_per_cell, mono) ** q
    return float((total / N) ** (1.0 / q))


def dyadic_pieces(F, n_range, resolution=2048):
    """Sampled pieces ``F_l = omega(2^-l .) (F - F(0))`` on ``[2^(l-2), 2^l]``.

    Summing the pieces reproduces ``F - F(0)`` on the covered range.
    """
    f = as_function(F)
    v0 = F.value_at_zero if isinstance(F, MultiplierProfile) else f(np.array([0.0]))[0]
    out = []
    for l in range(int(n_range[0]), int(n_range[1]) + 1):
        a, b = 2.0 ** (l - 2), 2.0 ** l

        def func(x, l=l):
            return OMEGA(x * 2.0 ** (-l)) * (f(x) - v0)

        out.append(SampledProfile.sample(func, a, b, resolution, support=(a, b)))
    return out


def evaluate_pieces(pieces, lam):
    """Sum of piecewise-linear interpolants of the sampled pieces at ``lam``."""
    lam = np.asarray(lam, dtype=float)
    total = np.zeros(lam.shape, dtype=complex)
    for p in pieces:
        re = np.interp(lam, p.x, p.values.real, left=0.0, right=0.0)
        im = np.interp(lam, p.x, p.values.imag, left=0.0, right=0.0)
        total += re + 1j * im
    return total
