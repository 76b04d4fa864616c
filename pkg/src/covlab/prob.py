"""Finite distributions, conditional kernels, i.i.d. block extensions and
Markov-factored triples.

Blocks are integer arrays of symbol indices. When a block space is enumerated
the order is lexicographic with position 0 most significant, so the row index
of a block in :func:`all_blocks` equals :func:`block_code` of that block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ValidationError, ZeroMassError

ENUM_CAP = 2**20
SUM_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


# --------------------------------------------------------------------------
# distributions and kernels


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability table over a finite (possibly product) alphabet.

    ``weights`` may be multi-dimensional; a 2-D table is a joint law over
    pairs with the first axis as the first coordinate.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim == 0 or w.size == 0:
            raise ValidationError("distribution needs at least one symbol")
        if not np.all(np.isfinite(w)):
            raise ValidationError("distribution weights must be finite")
        if np.any(w < 0):
            bad = tuple(int(i) for i in np.argwhere(w < 0)[0])
            raise ValidationError(f"negative weight at index {bad}")
        total = w.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def alphabet_size(self) -> int:
        return int(self.weights.size)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def ndim(self) -> int:
        return self.weights.ndim

    def __len__(self):
        return self.alphabet_size

    def __repr__(self):
        return f"FiniteDistribution({np.array2string(self.weights, precision=4)})"

    def flat(self) -> "FiniteDistribution":
        return FiniteDistribution(self.weights.reshape(-1))

    def marginal(self, keep: int | Sequence[int]) -> "FiniteDistribution":
        return marginalize(self, keep)

    def condition(self, given: int = 0) -> "ConditionalKernel":
        return condition(self, given)


def make_distribution(weights) -> FiniteDistribution:
    """Normalize nonnegative weights into a distribution."""
    w = np.array(weights, dtype=float)
    if w.size == 0:
        raise ValidationError("empty weight vector")
    if not np.all(np.isfinite(w)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(w))[0])
        raise ValidationError(f"non-finite weight at index {bad}")
    if np.any(w < 0):
        bad = tuple(int(i) for i in np.argwhere(w < 0)[0])
        raise ValidationError(f"negative weight at index {bad}")
    total = w.sum()
    if total <= 0:
        raise ValidationError("all weights are zero (index 0 onward); need one positive entry")
    return FiniteDistribution(w / total)


@dataclass(frozen=True, eq=False)
class ConditionalKernel:
    """Row-stochastic matrix ``matrix[x, y] = P(y | x)``.

    Rows that came from zero conditioning mass are kept as NaN and flagged
    in ``valid``; reading one raises :class:`ZeroMassError`.
    """

    matrix: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
            raise ValidationError(f"kernel must be a nonempty 2-D table, got shape {m.shape}")
        valid = np.ones(m.shape[0], bool) if self.valid is None else np.array(self.valid, bool)
        if valid.shape != (m.shape[0],):
            raise ValidationError("valid mask length must equal the number of rows")
        for i in np.flatnonzero(valid):
            row = m[i]
            if not np.all(np.isfinite(row)) or np.any(row < 0):
                raise ValidationError(f"kernel row {i} has negative or non-finite entries")
            if abs(row.sum() - 1.0) > SUM_TOL:
                raise ValidationError(f"kernel row {i} sums to {row.sum()!r}")
        m[~valid] = np.nan
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "valid", _frozen(valid))

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self) -> list[FiniteDistribution | None]:
        return [FiniteDistribution(r) if ok else None for r, ok in zip(self.matrix, self.valid)]

    def row(self, x: int) -> np.ndarray:
        if not self.valid[x]:
            raise ZeroMassError(f"kernel row {x} has zero conditioning mass")
        return self.matrix[x]

    def apply(self, dist: FiniteDistribution) -> FiniteDistribution:
        """Output marginal of ``dist`` pushed through the kernel."""
        return FiniteDistribution(self.joint(dist).weights.sum(axis=0))

    def joint(self, dist: FiniteDistribution) -> FiniteDistribution:
        p = dist.weights.reshape(-1)
        if p.size != self.input_size:
            raise ValidationError(f"input size {p.size} != kernel input size {self.input_size}")
        if np.any(p[~self.valid] > 0):
            raise ZeroMassError("input distribution charges an invalid kernel row")
        m = np.where(self.valid[:, None], self.matrix, 0.0)
        return FiniteDistribution(p[:, None] * m)


# --------------------------------------------------------------------------
# named families


def uniform(k: int) -> FiniteDistribution:
    return FiniteDistribution(np.full(k, 1.0 / k))


def point_mass(k: int, symbol: int) -> FiniteDistribution:
    w = np.zeros(k)
    w[symbol] = 1.0
    return FiniteDistribution(w)


def dsbs(p: float) -> FiniteDistribution:
    """Doubly symmetric binary source: uniform pair disagreeing w.p. ``p``."""
    if not 0 <= p <= 1:
        raise ValidationError(f"crossover {p} outside [0, 1]")
    return FiniteDistribution([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


def bsc(q: float) -> ConditionalKernel:
    if not 0 <= q <= 1:
        raise ValidationError(f"crossover {q} outside [0, 1]")
    return ConditionalKernel([[1 - q, q], [q, 1 - q]])


def identity_kernel(k: int) -> ConditionalKernel:
    return ConditionalKernel(np.eye(k))


def constant_kernel(k_in: int, k_out: int, symbol: int = 0) -> ConditionalKernel:
    m = np.zeros((k_in, k_out))
    m[:, symbol] = 1.0
    return ConditionalKernel(m)


def product(*dists: FiniteDistribution) -> FiniteDistribution:
    """Independent joint of the given (1-D) distributions."""
    w = dists[0].weights
    for d in dists[1:]:
        w = np.multiply.outer(w, d.weights)
    return FiniteDistribution(w)


# --------------------------------------------------------------------------
# marginals and conditionals


def marginalize(joint: FiniteDistribution, keep: int | Sequence[int]) -> FiniteDistribution:
    keep = (keep,) if isinstance(keep, (int, np.integer)) else tuple(keep)
    nd = joint.ndim
    if not keep or any(not 0 <= k < nd for k in keep) or len(set(keep)) != len(keep):
        raise ValidationError(f"invalid coordinates {keep} for a {nd}-D joint")
    drop = tuple(a for a in range(nd) if a not in keep)
    w = joint.weights.sum(axis=drop) if drop else joint.weights
    # sum() keeps the remaining axes in increasing order; honor the requested order
    order = sorted(keep)
    w = np.transpose(w, [order.index(k) for k in keep])
    return FiniteDistribution(w)


def condition(joint: FiniteDistribution, given: int = 0) -> ConditionalKernel:
    """Kernel ``P(other | given)`` of a 2-D joint; zero-mass rows are flagged."""
    if joint.ndim != 2:
        raise ValidationError("condition() expects a 2-D joint")
    w = joint.weights if given == 0 else joint.weights.T
    mass = w.sum(axis=1)
    valid = mass > 0
    rows = np.full(w.shape, np.nan)
    rows[valid] = w[valid] / mass[valid, None]
    return ConditionalKernel(rows, valid)


# --------------------------------------------------------------------------
# block spaces


def block_space_size(k: int, n: int) -> int:
    return k**n


def check_enumerable(k: int, n: int, cap: int = ENUM_CAP, what: str = "block space") -> int:
    size = k**n
    if size > cap:
        raise CapacityError(f"{what} has {k}^{n} = {size} blocks, over the cap of {cap}",
                            required=size, cap=cap)
    return size


def all_blocks(k: int, n: int, cap: int = ENUM_CAP) -> np.ndarray:
    """Every length-``n`` block over ``k`` symbols, lexicographic order."""
    size = check_enumerable(k, n, cap)
    codes = np.arange(size, dtype=np.int64)
    return block_from_code(codes, k, n)


def block_code(blocks, k: int) -> np.ndarray | int:
    b = np.asarray(blocks, dtype=np.int64)
    n = b.shape[-1]
    pw = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = b @ pw
    return int(out) if b.ndim == 1 else out


def block_from_code(codes, k: int, n: int) -> np.ndarray:
    c = np.asarray(codes, dtype=np.int64)
    pw = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((c[..., None] // pw) % k).astype(np.int64)


class BlockDistribution:
    """n-fold i.i.d. extension of a single-letter law.

    For a multi-coordinate letter law, a block is given as one symbol array
    per coordinate, e.g. ``prob(v_block, w_block)``.
    """

    def __init__(self, letter: FiniteDistribution, n: int, cap: int = ENUM_CAP):
        if n < 1:
            raise ValidationError(f"blocklength must be >= 1, got {n}")
        self.letter = letter
        self.n = n
        self.cap = cap
        with np.errstate(divide="ignore"):
            self._log = np.log(letter.weights)

    @property
    def size(self) -> int:
        return self.letter.alphabet_size**self.n

    def log_prob(self, *blocks) -> float:
        idx = tuple(np.asarray(b, dtype=np.int64) for b in blocks)
        if len(idx) != self.letter.ndim:
            raise ValidationError(f"expected {self.letter.ndim} block coordinate(s)")
        if any(len(b) != self.n for b in idx):
            raise ValidationError(f"blocks must have length {self.n}")
        return float(self._log[idx].sum())

    def prob(self, *blocks) -> float:
        return math.exp(self.log_prob(*blocks))

    def enumerate(self) -> tuple[np.ndarray, np.ndarray]:
        """All blocks of the flattened letter alphabet with their probabilities.

        Returns ``(blocks, probs)``; for a joint letter law ``blocks`` indexes
        flattened pairs (use ``np.unravel_index`` with ``letter.shape``).
        """
        k = self.letter.alphabet_size
        return all_blocks(k, self.n, self.cap), self.probabilities()

    def probabilities(self) -> np.ndarray:
        """Vector of block probabilities in lexicographic code order."""
        p = np.ones(1)
        w = self.letter.weights.reshape(-1)
        check_enumerable(w.size, self.n, self.cap)
        for _ in range(self.n):
            p = np.multiply.outer(p, w).reshape(-1)
        return p


def product_extension(letter: FiniteDistribution, n: int, cap: int = ENUM_CAP) -> BlockDistribution:
    return BlockDistribution(letter, n, cap)


def block_kernel(kernel: ConditionalKernel, n: int, cap: int = ENUM_CAP) -> np.ndarray:
    """Letterwise kernel extended to blocks, as a dense ``(|X|^n, |Y|^n)`` matrix."""
    check_enumerable(kernel.input_size * kernel.output_size, n, cap, "block kernel")
    m = np.where(kernel.valid[:, None], kernel.matrix, 0.0)
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, m)
    return out


def markov_block_law(initial: FiniteDistribution, transition: ConditionalKernel, n: int,
                     cap: int = ENUM_CAP) -> FiniteDistribution:
    """Block law of a finite-state Markov source (state = emitted symbol)."""
    k = initial.alphabet_size
    check_enumerable(k, n, cap)
    t = np.where(transition.valid[:, None], transition.matrix, 0.0)
    p = initial.weights.copy()
    for _ in range(n - 1):
        # last symbol of block code c is c % k
        p = (p[:, None] * t[np.arange(p.size) % k]).reshape(-1)
    return FiniteDistribution(p / p.sum())


# --------------------------------------------------------------------------
# Markov triples


@dataclass(frozen=True, eq=False)
class MarkovTriple:
    """Joint law ``P(u, v, w) = P(u, v) P(w | v)``.

    With ``single_letter`` set, ``joint_uv`` and ``kernel_w_given_v`` are
    per-letter laws and the block law is their ``blocklength``-fold i.i.d.
    extension. Otherwise they are already block-level tables indexed by
    block codes and ``letter_sizes`` gives ``(|U|, |V|, |W|)`` per letter.
    """

    joint_uv: FiniteDistribution
    kernel_w_given_v: ConditionalKernel
    blocklength: int = 1
    single_letter: bool = True
    letter_sizes: tuple[int, int, int] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.blocklength < 1:
            raise ValidationError("blocklength must be >= 1")
        if self.joint_uv.ndim != 2:
            raise ValidationError("joint_uv must be a 2-D joint over (u, v)")
        if self.kernel_w_given_v.input_size != self.joint_uv.shape[1]:
            raise ValidationError(
                f"kernel input size {self.kernel_w_given_v.input_size} does not match "
                f"v-alphabet size {self.joint_uv.shape[1]}")
        pv = self.joint_uv.weights.sum(axis=0)
        if np.any(pv[~self.kernel_w_given_v.valid] > 0):
            raise ZeroMassError("kernel row is invalid at a v-symbol of positive probability")
        if self.single_letter:
            sizes = (self.joint_uv.shape[0], self.joint_uv.shape[1], self.kernel_w_given_v.output_size)
            object.__setattr__(self, "letter_sizes", sizes)
        elif self.letter_sizes is None:
            raise ValidationError("block-level triples need letter_sizes")

    # single-letter (or block-level, when not single_letter) tables
    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.joint_uv.shape[0], self.joint_uv.shape[1], self.kernel_w_given_v.output_size)

    def joint(self) -> np.ndarray:
        k = np.where(self.kernel_w_given_v.valid[:, None], self.kernel_w_given_v.matrix, 0.0)
        return self.joint_uv.weights[:, :, None] * k[None, :, :]

    @property
    def p_uvw(self) -> FiniteDistribution:
        return FiniteDistribution(self.joint())

    @property
    def p_v(self) -> np.ndarray:
        return self.joint_uv.weights.sum(axis=0)

    @property
    def p_u(self) -> np.ndarray:
        return self.joint_uv.weights.sum(axis=1)

    @property
    def joint_vw(self) -> FiniteDistribution:
        return FiniteDistribution(self.joint().sum(axis=0))

    @property
    def joint_uw(self) -> FiniteDistribution:
        return FiniteDistribution(self.joint().sum(axis=1))

    @property
    def p_w(self) -> np.ndarray:
        return self.joint().sum(axis=(0, 1))

    @property
    def u_given_v(self) -> ConditionalKernel:
        return condition(self.joint_uv, given=1)

    def at_blocklength(self, n: int) -> "MarkovTriple":
        if not self.single_letter:
            raise ValidationError("block-level triples have a fixed blocklength")
        return MarkovTriple(self.joint_uv, self.kernel_w_given_v, n)

    def block_tables(self, cap: int = ENUM_CAP) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(P_UV over block pairs, P_W|V over blocks)``."""
        if "block" in self._cache:
            return self._cache["block"]
        if not self.single_letter:
            out = (self.joint_uv.weights, np.where(self.kernel_w_given_v.valid[:, None],
                                                   self.kernel_w_given_v.matrix, 0.0))
        else:
            n = self.blocklength
            ku, kv, _ = self.sizes
            check_enumerable(ku * kv, n, cap, "(u, v) block-pair space")
            puv = np.ones((1, 1))
            for _ in range(n):
                puv = np.kron(puv, self.joint_uv.weights)
            out = (puv, block_kernel(self.kernel_w_given_v, n, cap))
        self._cache["block"] = out
        return out

    @classmethod
    def from_block_law(cls, joint_uv_blocks: FiniteDistribution, kernel_blocks: ConditionalKernel,
                       n: int, letter_sizes: tuple[int, int, int]) -> "MarkovTriple":
        ku, kv, kw = letter_sizes
        if joint_uv_blocks.shape != (ku**n, kv**n) or kernel_blocks.output_size != kw**n:
            raise ValidationError("block tables do not match letter_sizes at this blocklength")
        return cls(joint_uv_blocks, kernel_blocks, n, single_letter=False, letter_sizes=letter_sizes)


def compose_markov(joint_uv: FiniteDistribution, kernel_w_given_v: ConditionalKernel,
                   n: int = 1) -> MarkovTriple:
    return MarkovTriple(joint_uv, kernel_w_given_v, n)


# --------------------------------------------------------------------------
# sampling


def rng_stream(seed: int, stream: int | Sequence[int] = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``; same pair, same draws."""
    key = (stream,) if isinstance(stream, (int, np.integer)) else tuple(stream)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))


def _draw(p: np.ndarray, size, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    # skip zero-mass trailing symbols that would share cdf == 1
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(idx, len(p) - 1)


def sample_block(dist: FiniteDistribution, n: int, rng: np.random.Generator, count: int | None = None):
    """Draw an i.i.d. block (or ``count`` blocks) from a letter law.

    Joint letter laws return one array per coordinate.
    """
    shape = (n,) if count is None else (count, n)
    flat = _draw(dist.weights.reshape(-1), shape, rng)
    if dist.ndim == 1:
        return flat
    return np.unravel_index(flat, dist.shape)


def sample_chain(dist: FiniteDistribution, kernels: Sequence[ConditionalKernel], n: int,
                 rng: np.random.Generator, count: int | None = None) -> tuple[np.ndarray, ...]:
    """Sample ``X ~ dist`` then each ``Y_{k+1} ~ kernels[k](. | Y_k)`` letterwise."""
    out = [sample_block(dist, n, rng, count)]
    for kern in kernels:
        prev = out[-1]
        m = np.where(kern.valid[:, None], kern.matrix, 0.0)
        cdf = np.cumsum(m, axis=1)
        cdf[:, -1] = 1.0
        r = rng.random(prev.shape)
        nxt = (r[..., None] >= cdf[prev]).sum(axis=-1)
        out.append(np.minimum(nxt, kern.output_size - 1))
    return tuple(out)


def sample_markov(initial: FiniteDistribution, transition: ConditionalKernel, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    x = np.empty(n, dtype=np.int64)
    x[0] = _draw(initial.weights, None, rng)
    for i in range(1, n):
        x[i] = _draw(transition.row(x[i - 1]), None, rng)
    return x


# --------------------------------------------------------------------------
# plain-text tables


def load_table(text: str) -> np.ndarray:
    """Parse whitespace-separated decimal rows; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    if not rows:
        raise ValidationError("table is empty")
    if len({len(r) for r in rows}) != 1:
        raise ValidationError("table rows have different lengths")
    return np.array(rows)


def parse_distribution(text: str) -> FiniteDistribution:
    t = load_table(text)
    return make_distribution(t[0] if t.shape[0] == 1 else t)


def parse_kernel(text: str) -> ConditionalKernel:
    return ConditionalKernel(load_table(text))
