"""
Special polynomials over Z_p and Z_{p^e}.

The comparison and digit-extraction pipeline needs four families:

    F_EQ      1 - x^(p-1) over Z_p: 1 at zero, 0 elsewhere
    F_LT      degree p-1 interpolant of "balanced value is negative" over Z_p
    F_p       degree-p lifting polynomial: F(z0 + p^t z1) = z0 mod p^(t+1)
    G_{p,e}   degree (e-1)(p-1)+1 polynomial returning the balanced lowest
              digit of any x in Z_{p^e}

F_EQ and F_LT are written down directly. F_p and G_{p,e} are obtained by
solving their defining congruences as linear systems over Z_{p^e}, then
checked against the defining property (exhaustively when p^e is small).
"""

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
import sympy

from .errors import ModulusMismatchError, SpaceSwitchError
from .ring import Residue, balanced_mod

logger = logging.getLogger(__name__)

# Above this domain size, polynomial certificates are checked on a sample.
VERIFY_EXHAUSTIVE_LIMIT = 1 << 16
VERIFY_SAMPLE_SIZE = 1 << 14

# int64 products of two residues stay exact below this modulus.
INT64_SAFE_MODULUS = 1 << 31


def _dtype_for(modulus: int) -> Any:
    return np.int64 if modulus < INT64_SAFE_MODULUS else object


@dataclass(frozen=True)
class DensePoly:
    """
    Univariate polynomial over Z_m by dense coefficient list.

    Attributes:
        coeffs: Coefficients in [0, modulus), constant term first
        modulus: Common modulus m (a prime power p^e)
        name: Label used by the cost ledger, e.g. "G_{p,3}" or "F_LT"
    """

    coeffs: tuple[int, ...]
    modulus: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("A polynomial needs at least one coefficient")
        m = self.modulus
        if any(not 0 <= c < m for c in self.coeffs):
            raise ValueError(f"Coefficients must lie in [0, {m})")

    @classmethod
    def from_ints(cls, values: Iterable[int], modulus: int, name: str = "") -> "DensePoly":
        """Reduce values mod m and drop trailing zero coefficients."""
        coeffs = [int(v) % modulus for v in values]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        return cls(tuple(coeffs) or (0,), modulus, name)

    @property
    def degree(self) -> int:
        """Index of the highest nonzero coefficient (0 for constants)."""
        for i in range(len(self.coeffs) - 1, 0, -1):
            if self.coeffs[i]:
                return i
        return 0

    @property
    def is_odd(self) -> bool:
        return all(c == 0 for c in self.coeffs[0::2])

    @property
    def is_even(self) -> bool:
        return all(c == 0 for c in self.coeffs[1::2])

    def balanced_coeffs(self) -> tuple[int, ...]:
        return tuple(balanced_mod(c, self.modulus) for c in self.coeffs)

    def with_modulus(self, modulus: int) -> "DensePoly":
        """Re-read the balanced coefficients modulo another modulus."""
        return DensePoly.from_ints(self.balanced_coeffs(), modulus, self.name)

    def __call__(self, x: int) -> int:
        m = self.modulus
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % m
        return acc

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised Horner evaluation modulo m."""
        m = self.modulus
        dt = _dtype_for(m)
        points = np.asarray(xs).astype(dt) % m
        acc = np.zeros(points.shape, dtype=dt)
        for c in reversed(self.coeffs):
            acc = (acc * points + c) % m
        return acc


@dataclass(frozen=True)
class OddDecomposition:
    """
    f(x) = x * H(x^2) (odd) or H(x^2) (even).

    Attributes:
        h: The polynomial H
        odd: True for the x * H(x^2) form
    """

    h: DensePoly
    odd: bool

    def recompose(self) -> DensePoly:
        coeffs = [0] * (2 * len(self.h.coeffs) + 1)
        offset = 1 if self.odd else 0
        for i, c in enumerate(self.h.coeffs):
            coeffs[2 * i + offset] = c
        return DensePoly.from_ints(coeffs, self.h.modulus, self.h.name)


def poly_eval_clear(f: DensePoly, x: Residue) -> Residue:
    """
    Evaluate f at x by Horner's rule.

    Raises:
        ModulusMismatchError: If f and x use different moduli
    """
    if f.modulus != x.modulus:
        raise ModulusMismatchError(f"Polynomial modulus {f.modulus} vs residue modulus {x.modulus}")
    return Residue(f(x.value), f.modulus)


def lowest_digits(xs: np.ndarray, p: int) -> np.ndarray:
    """Balanced lowest base-p digit of each entry."""
    half = p // 2
    return (np.asarray(xs) + half) % p - half


def _require_prime(p: int) -> None:
    if p < 2 or not sympy.isprime(p):
        raise ValueError(f"p must be prime, got {p}")


def _require_odd_prime(p: int) -> None:
    _require_prime(p)
    if p == 2:
        raise ValueError("p must be an odd prime")


def build_F_EQ(p: int) -> DensePoly:
    """
    1 - x^(p-1) over Z_p.

    Example:
        >>> build_F_EQ(5).coeffs
        (1, 0, 0, 0, 4)
    """
    _require_prime(p)
    coeffs = [0] * p
    coeffs[0] = 1
    coeffs[p - 1] = (coeffs[p - 1] - 1) % p
    return DensePoly.from_ints(coeffs, p, "F_EQ")


def build_F_LT(p: int) -> DensePoly:
    """
    Less-than-zero interpolant over Z_p for balanced inputs.

    Odd coefficients are c_i = sum_{j=1}^{(p-1)/2} j^(p-1-i), the leading
    coefficient is (p+1)/2 and every other coefficient vanishes.

    Example:
        >>> build_F_LT(5).coeffs
        (0, 4, 0, 3, 3)
    """
    _require_odd_prime(p)
    half = (p - 1) // 2
    coeffs = [0] * p
    coeffs[p - 1] = (p + 1) // 2
    js = np.arange(1, half + 1, dtype=np.int64)
    power = js.copy()
    # power holds j^m for m = 1 .. p-2; odd i pairs with odd m = p-1-i
    for m in range(1, p - 1):
        i = p - 1 - m
        if i % 2 == 1:
            coeffs[i] = int(power.sum() % p)
        power = power * js % p
    return DensePoly.from_ints(coeffs, p, "F_LT")


def lt_zero_truth(p: int) -> dict[int, int]:
    """Truth table of "balanced value < 0" on Z_p."""
    return {a: 1 if balanced_mod(a, p) < 0 else 0 for a in range(p)}


def build_interp(p: int, truth: Mapping[int, int] | Callable[[int], int]) -> DensePoly:
    """
    Lagrange interpolant over Z_p with degree at most p-1.

    Uses the expansion of sum_a f(a) (1 - (X - a)^(p-1)):
    the constant term is f(0), and the X^k coefficient for k >= 1 is
    -sum_a f(a) a^(p-1-k).

    Args:
        p: Prime modulus
        truth: Values f(a) for every a in Z_p, as a mapping or a callable

    Raises:
        ValueError: If the truth table misses any residue
    """
    _require_prime(p)
    if callable(truth):
        table = [int(truth(a)) % p for a in range(p)]
    else:
        seen = {k % p: int(v) % p for k, v in truth.items()}
        missing = [a for a in range(p) if a not in seen]
        if missing:
            raise ValueError(f"Incomplete truth table: missing {missing[:5]}")
        table = [seen[a] for a in range(p)]

    fa = np.array(table, dtype=np.int64)
    points = np.arange(p, dtype=np.int64)
    # sums[m] = sum_a f(a) * a^m with 0^0 = 1
    sums = [0] * p
    power = np.ones(p, dtype=np.int64)
    for m in range(p - 1):
        sums[m] = int((fa * power % p).sum() % p)
        power = power * points % p
    coeffs = [table[0]] + [(-sums[p - 1 - k]) % p for k in range(1, p)]
    return DensePoly.from_ints(coeffs, p, "interp")


def _valuations(block: np.ndarray, p: int, e: int) -> np.ndarray:
    """p-adic valuation of every entry, capped at e (zero entries get e)."""
    vals = np.zeros(block.shape, dtype=np.int64)
    rem = block.copy()
    for _ in range(e):
        divisible = rem % p == 0
        vals += divisible
        rem = np.where(divisible, rem // p, rem)
    return vals


def solve_mod_prime_power(
    matrix: Sequence[Sequence[int]], rhs: Sequence[int], p: int, e: int
) -> list[int]:
    """
    Solve matrix @ x = rhs over Z_{p^e}.

    Full pivoting on the entry of least p-adic valuation reduces the system
    to diagonal form with row operations below the pivot and column
    operations to its right. Free variables are set to 0.

    Returns:
        One solution, entries in [0, p^e)

    Raises:
        SpaceSwitchError: If the system is inconsistent
    """
    modulus = p**e
    dt = _dtype_for(modulus)
    a = np.array(matrix, dtype=dt) % modulus
    c = np.array(rhs, dtype=dt) % modulus
    rows, cols = a.shape
    transform = np.zeros((cols, cols), dtype=dt)
    transform[np.arange(cols), np.arange(cols)] = 1
    pivots: list[tuple[int, int]] = []

    for step in range(min(rows, cols)):
        vals = _valuations(a[step:, step:], p, e)
        flat = int(np.argmin(vals))
        v = int(vals.flat[flat])
        if v >= e:
            break
        i, j = divmod(flat, cols - step)
        i += step
        j += step
        if i != step:
            a[[step, i]] = a[[i, step]]
            c[[step, i]] = c[[i, step]]
        if j != step:
            a[:, [step, j]] = a[:, [j, step]]
            transform[:, [step, j]] = transform[:, [j, step]]

        scale = p**v
        unit = int(a[step, step]) // scale
        inv = pow(unit, -1, modulus)

        factors = (a[step + 1 :, step] // scale) * inv % modulus
        a[step + 1 :] = (a[step + 1 :] - factors[:, None] * a[step][None, :]) % modulus
        c[step + 1 :] = (c[step + 1 :] - factors * c[step]) % modulus

        col_factors = (a[step, step + 1 :] // scale) * inv % modulus
        a[step, step + 1 :] = 0
        transform[:, step + 1 :] = (
            transform[:, step + 1 :] - transform[:, step][:, None] * col_factors[None, :]
        ) % modulus
        pivots.append((v, unit))

    rank = len(pivots)
    if any(int(c[k]) % modulus for k in range(rank, rows)):
        raise SpaceSwitchError(f"Inconsistent system over Z_{p}^{e}")

    y = [0] * cols
    for j, (v, unit) in enumerate(pivots):
        cj = int(c[j])
        if cj % p**v:
            raise SpaceSwitchError(f"Inconsistent system over Z_{p}^{e} at pivot {j}")
        reduced = p ** (e - v)
        y[j] = (cj // p**v) * pow(unit, -1, reduced) % reduced

    x = [0] * cols
    for j, yj in enumerate(y):
        if yj:
            column = transform[:, j]
            for k in range(cols):
                x[k] = (x[k] + int(column[k]) * yj) % modulus
    return x


def _vandermonde(points: Sequence[int], degree: int, modulus: int) -> list[list[int]]:
    return [[pow(x, j, modulus) for j in range(degree + 1)] for x in points]


def _check_points(p: int, e: int) -> np.ndarray:
    modulus = p**e
    if modulus <= VERIFY_EXHAUSTIVE_LIMIT:
        return np.arange(modulus, dtype=np.int64)
    rng = np.random.default_rng([p, e])
    sample = rng.integers(0, modulus, size=VERIFY_SAMPLE_SIZE, dtype=np.int64)
    return np.concatenate([np.arange(min(modulus, 4 * p), dtype=np.int64), sample])


def verify_lowest_digit(g: DensePoly, p: int, e: int) -> list[tuple[int, int, int]]:
    """
    Check g(x) = balanced lowest digit of x (mod p^e).

    Exhaustive up to VERIFY_EXHAUSTIVE_LIMIT points, sampled above.

    Returns:
        Up to ten counterexamples (x, got, expected); empty when g passes
    """
    modulus = p**e
    xs = _check_points(p, e)
    got = g.evaluate(xs)
    expected = lowest_digits(xs, p) % modulus
    bad = np.nonzero(got != expected)[0][:10]
    return [(int(xs[i]), int(got[i]), int(expected[i])) for i in bad]


def verify_lift(f: DensePoly, p: int, e: int) -> list[tuple[int, int, int]]:
    """
    Check F(z0 + p^t z1) = z0 (mod p^(t+1)) for 1 <= t <= e-1.

    z0 is the balanced lowest digit of x; an input qualifies for level t when
    x = z0 (mod p^t).

    Returns:
        Up to ten counterexamples (x, t, F(x)); empty when F passes
    """
    xs = _check_points(p, e)
    z0 = lowest_digits(xs, p)
    fx = f.evaluate(xs)
    failures: list[tuple[int, int, int]] = []
    for t in range(1, e):
        applies = (xs - z0) % p**t == 0
        wrong = (fx - z0) % p ** (t + 1) != 0
        for i in np.nonzero(applies & wrong)[0][:10]:
            failures.append((int(xs[i]), t, int(fx[i])))
    return failures[:10]


def verify_truth_table(f: DensePoly, truth: Mapping[int, int]) -> list[tuple[int, int, int]]:
    """Compare f with a truth table at every listed point."""
    points = sorted(truth)
    got = f.evaluate(np.array(points, dtype=np.int64))
    return [
        (a, int(v), truth[a] % f.modulus)
        for a, v in zip(points, got.tolist(), strict=True)
        if int(v) != truth[a] % f.modulus
    ][:10]


def symmetrize_odd(f: DensePoly) -> DensePoly:
    """(f(x) - f(-x)) / 2, i.e. f with its even-degree coefficients removed."""
    if f.modulus % 2 == 0:
        raise ValueError("Symmetrisation needs an odd modulus")
    coeffs = [c if i % 2 else 0 for i, c in enumerate(f.coeffs)]
    return DensePoly.from_ints(coeffs, f.modulus, f.name)


def odd_part_decompose(f: DensePoly) -> OddDecomposition:
    """
    Write f as x * H(x^2) or H(x^2).

    Raises:
        ValueError: If f is neither odd nor even
    """
    if f.is_odd and f.degree > 0:
        h = DensePoly.from_ints(f.coeffs[1::2], f.modulus, f.name)
        return OddDecomposition(h, odd=True)
    if f.is_even:
        h = DensePoly.from_ints(f.coeffs[0::2], f.modulus, f.name)
        return OddDecomposition(h, odd=False)
    raise ValueError(f"Polynomial {f.name or ''} is neither odd nor even".replace("  ", " "))


def g_degree(p: int, e: int) -> int:
    return (e - 1) * (p - 1) + 1


@lru_cache(maxsize=None)
def build_G(p: int, e: int) -> DensePoly:
    """
    Lowest-digit polynomial G_{p,e} over Z_{p^e}.

    A polynomial of degree D = (e-1)(p-1)+1 that vanishes mod p^e on the
    D+1 consecutive integers 0..D vanishes on every integer (its forward
    differences are all zero), so fitting the balanced lowest digit on
    0..D is enough. The solution is then made odd by dropping its even
    coefficients.

    Example:
        >>> build_G(5, 2)(7), build_G(5, 2)(13)
        (2, 23)

    Raises:
        SpaceSwitchError: If the fit fails verification
    """
    _require_odd_prime(p)
    if e < 1:
        raise ValueError(f"e must be at least 1, got {e}")
    modulus = p**e
    name = f"G_{{p,{e}}}"
    if e == 1:
        return DensePoly((0, 1), modulus, name)

    degree = g_degree(p, e)
    points = list(range(degree + 1))
    half = p // 2
    targets = [((x + half) % p - half) % modulus for x in points]
    coeffs = solve_mod_prime_power(_vandermonde(points, degree, modulus), targets, p, e)
    g = symmetrize_odd(DensePoly.from_ints(coeffs, modulus, name))

    failures = verify_lowest_digit(g, p, e)
    if failures:
        raise SpaceSwitchError(f"{name} for p={p} failed verification at {failures[:3]}")
    logger.debug("Built %s for p=%d (degree %d)", name, p, g.degree)
    return g


@lru_cache(maxsize=None)
def build_F_lift(p: int, e: int) -> DensePoly:
    """
    Lifting polynomial F_p = x^p + p*K(x) over Z_{p^e}.

    K interpolates (z - z^p)/p at the balanced digits z over Z_{p^(e-1)};
    the digit differences are units, so the Vandermonde system is invertible.

    Raises:
        SpaceSwitchError: If the result fails verification
    """
    _require_odd_prime(p)
    if e < 2:
        raise ValueError(f"e must be at least 2, got {e}")
    modulus = p**e
    inner = p ** (e - 1)
    half = p // 2
    digits = list(range(-half, half + 1))
    targets = [((z - z**p) // p) % inner for z in digits]
    k_coeffs = solve_mod_prime_power(
        _vandermonde([z % inner for z in digits], p - 1, inner), targets, p, e - 1
    )
    coeffs = [p * k for k in k_coeffs] + [1]
    f = DensePoly.from_ints(coeffs, modulus, "F_p")

    failures = verify_lift(f, p, e)
    if failures:
        raise SpaceSwitchError(f"F_p for p={p}, e={e} failed verification at {failures[:3]}")
    logger.debug("Built F_p for p=%d, e=%d", p, e)
    return f


def poly_to_json(f: DensePoly) -> dict[str, Any]:
    return {
        "name": f.name,
        "modulus": f.modulus,
        "degree": f.degree,
        "coeffs": list(f.coeffs),
    }


def poly_from_json(data: Mapping[str, Any]) -> DensePoly:
    return DensePoly.from_ints(data["coeffs"], int(data["modulus"]), str(data.get("name", "")))
