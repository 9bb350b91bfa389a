"""Distributions, reproducible scenario sampling, basis functions and
their moments, and confidence-interval statistics.

Sampling is counter-based: every (seed, stage) pair gets its own Philox
stream, and values are produced by inverse-CDF from a single uniform
draw per entry, so path j is a pure function of (seed, j) regardless of
how many paths are drawn or in what order they are consumed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ModelError, TooFewSamples, UnsupportedMoment


# ---------------------------------------------------------------------------
# scalar distributions

@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ModelError(f"Uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def var(self):
        return (self.hi - self.lo) ** 2 / 12.0

    def second_moment(self):
        return self.mean() ** 2 + self.var()

    def from_uniform(self, u):
        return self.lo + (self.hi - self.lo) * u

    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class LogNormal:
    """Parameters of the underlying normal (mean exp(mu + sigma^2/2))."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("LogNormal needs sigma > 0")

    def mean(self):
        return float(np.exp(self.mu + 0.5 * self.sigma**2))

    def var(self):
        s2 = self.sigma**2
        return float((np.exp(s2) - 1.0) * np.exp(2 * self.mu + s2))

    def second_moment(self):
        return self.mean() ** 2 + self.var()

    def from_uniform(self, u):
        return np.exp(self.mu + self.sigma * ndtri(u))

    def support(self):
        return (0.0, np.inf)


@dataclass(frozen=True)
class Degenerate:
    value: float

    def mean(self):
        return self.value

    def var(self):
        return 0.0

    def second_moment(self):
        return self.value**2

    def from_uniform(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    def support(self):
        return (self.value, self.value)


# ---------------------------------------------------------------------------
# process and paths

@dataclass
class ProcessSpec:
    """Stage-wise independent scalar components; stage 1 is the constant 1."""

    stages: list  # stages[t-1] = list of distributions observed at stage t

    def __post_init__(self):
        if not self.stages:
            raise ModelError("need at least one stage")
        s1 = self.stages[0]
        if len(s1) != 1 or not isinstance(s1[0], Degenerate) or s1[0].value != 1.0:
            raise ModelError("stage 1 must be the single degenerate value 1")

    @property
    def T(self):
        return len(self.stages)

    def k(self, t):
        """Number of scalar components observed at stage t."""
        return len(self.stages[t - 1])

    def k_hist(self, t):
        """Total components observed through stage t."""
        return sum(self.k(r) for r in range(1, t + 1))


class PathBatch:
    """count sampled paths, stored stage-major as (count, k_t) arrays."""

    def __init__(self, proc: ProcessSpec, stage_arrays):
        self.proc = proc
        self.stage_arrays = stage_arrays  # list over t of (count, k_t)
        self.count = stage_arrays[0].shape[0]

    def stage(self, t):
        return self.stage_arrays[t - 1]

    def path(self, j):
        return ScenarioPath([a[j] for a in self.stage_arrays])

    def history_matrix(self, t):
        """(count, k^t) matrix of concatenated observations through t."""
        return np.concatenate([self.stage_arrays[r] for r in range(t)], axis=1)

    def subset(self, idx):
        return PathBatch(self.proc, [a[idx] for a in self.stage_arrays])

    def __len__(self):
        return self.count

    def __getitem__(self, j):
        return self.path(j)


@dataclass
class ScenarioPath:
    """Per-stage observation vectors xi_1..xi_T (xi_1 = (1,))."""

    obs: list

    def stage(self, t):
        return self.obs[t - 1]

    @property
    def T(self):
        return len(self.obs)

    def history(self, t):
        return self.obs[:t]


def sample_paths(proc: ProcessSpec, count: int, seed) -> PathBatch:
    """Draw ``count`` i.i.d. paths; pure function of (proc, count, seed).

    seed may be an int or a tuple (seed, stream) for stream discipline.
    """
    if count < 1:
        raise ModelError("count must be >= 1")
    entropy = seed if isinstance(seed, tuple) else (seed,)
    arrays = []
    for t in range(1, proc.T + 1):
        dists = proc.stages[t - 1]
        cols = []
        ss = np.random.SeedSequence(entropy=(*entropy, t))
        gen = np.random.Generator(np.random.Philox(ss))
        for d in dists:
            if isinstance(d, Degenerate):
                cols.append(np.full(count, d.value))
            else:
                u = gen.random(count)
                cols.append(np.asarray(d.from_uniform(u), dtype=float))
        arrays.append(np.column_stack(cols))
    return PathBatch(proc, arrays)


@dataclass(frozen=True)
class SampleConfig:
    """Training/evaluation sample sizes, seed, and stream ids."""

    N: int
    N_eval: int
    seed: int
    stream_train: int = 0
    stream_eval: int = 1
    stream_tune: int = 2

    def __post_init__(self):
        if self.N < 1 or self.N_eval < 2:
            raise ModelError("need N >= 1 and N_eval >= 2")

    def train_paths(self, proc):
        return sample_paths(proc, self.N, (self.seed, self.stream_train))

    def eval_paths(self, proc):
        return sample_paths(proc, self.N_eval, (self.seed, self.stream_eval))

    def tune_paths(self, proc, count=100):
        return sample_paths(proc, count, (self.seed, self.stream_tune))


# ---------------------------------------------------------------------------
# basis functions

class BasisSpec:
    """Per-stage basis evaluations and closed-form moment data.

    Subclasses provide K_t, pointwise and batched evaluation, the
    unconditional mean E[Phi_t], the one-step conditional mean
    E[Phi_{t+1} | xi^t] as an affine map of Phi_t, and (optionally)
    the second-moment matrix E[Phi_t Phi_t'].
    """

    def K(self, t):
        raise NotImplementedError

    def eval(self, t, history):
        raise NotImplementedError

    def eval_batch(self, t, batch: PathBatch):
        out = np.empty((len(batch), self.K(t)))
        for j in range(len(batch)):
            out[j] = self.eval(t, batch.path(j).history(t))
        return out

    def mean(self, t):
        raise NotImplementedError

    def cond_mean_map(self, t):
        """(M, m0) with E[Phi_{t+1} | xi^t] = M @ Phi_t + m0."""
        raise NotImplementedError

    def second_moment(self, t):
        raise UnsupportedMoment(type(self).__name__)

    def xi_affine(self, t):
        """Affine description of Phi_t in the uncertain components, or
        None when the basis is not affine in xi (blocks exact static
        reformulation)."""
        return None


def _check_stage(t, T):
    if not 1 <= t <= T:
        raise ModelError(f"stage {t} out of range [1, {T}]")


class StandardBasis(BasisSpec):
    """Phi_t = xi^t = (1, xi_2, ..., xi_t); requires scalar stages."""

    def __init__(self, proc: ProcessSpec):
        if any(proc.k(t) != 1 for t in range(1, proc.T + 1)):
            raise ModelError("standard basis here requires scalar stages")
        self.proc = proc
        self._means = np.array(
            [proc.stages[t][0].mean() for t in range(proc.T)]
        )
        self._second = np.array(
            [proc.stages[t][0].second_moment() for t in range(proc.T)]
        )

    def K(self, t):
        _check_stage(t, self.proc.T)
        return t

    def eval(self, t, history):
        _check_stage(t, self.proc.T)
        return np.array([history[r][0] for r in range(t)])

    def eval_batch(self, t, batch):
        return batch.history_matrix(t)

    def mean(self, t):
        _check_stage(t, self.proc.T)
        return self._means[:t].copy()

    def cond_mean_map(self, t):
        _check_stage(t + 1, self.proc.T)
        M = np.zeros((t + 1, t))
        M[:t, :t] = np.eye(t)
        m0 = np.zeros(t + 1)
        m0[t] = self._means[t]
        return M, m0

    def second_moment(self, t):
        _check_stage(t, self.proc.T)
        mu = self._means[:t]
        S = np.outer(mu, mu)
        np.fill_diagonal(S, self._second[:t])
        return S

    def xi_affine(self, t):
        """Phi_tk = xi_k: component k-1 of the flat history (k >= 2),
        the constant 1 for k = 1."""
        rows = []
        for k in range(t):
            if k == 0:
                rows.append((1.0, -1))  # constant
            else:
                rows.append((0.0, k))  # flat history component index
        return rows


class ProductBasis(BasisSpec):
    """Phi_t = (1, prod_r xi_{r,c1}, prod_r xi_{r,c2}) for t >= 2.

    Stage components multiply up over stages 2..t; K_1 = 1.  Moments
    use independence: E[prod] = prod of means.
    """

    def __init__(self, proc: ProcessSpec, comps=(0, 1)):
        self.proc = proc
        self.comps = tuple(comps)
        self._stage_means = [
            [proc.stages[t][c].mean() for c in range(proc.k(t + 1))]
            for t in range(proc.T)
        ]

    def K(self, t):
        _check_stage(t, self.proc.T)
        return 1 if t == 1 else 1 + len(self.comps)

    def eval(self, t, history):
        _check_stage(t, self.proc.T)
        if t == 1:
            return np.array([1.0])
        out = [1.0]
        for c in self.comps:
            p = 1.0
            for r in range(1, t):  # stages 2..t
                p *= history[r][c]
            out.append(p)
        return np.array(out)

    def eval_batch(self, t, batch):
        if t == 1:
            return np.ones((len(batch), 1))
        out = np.ones((len(batch), 1 + len(self.comps)))
        for ci, c in enumerate(self.comps):
            p = np.ones(len(batch))
            for r in range(2, t + 1):
                p = p * batch.stage(r)[:, c]
            out[:, 1 + ci] = p
        return out

    def mean(self, t):
        _check_stage(t, self.proc.T)
        if t == 1:
            return np.array([1.0])
        out = [1.0]
        for c in self.comps:
            p = 1.0
            for r in range(2, t + 1):
                p *= self._stage_means[r - 1][c]
            out.append(p)
        return np.array(out)

    def cond_mean_map(self, t):
        _check_stage(t + 1, self.proc.T)
        nxt = [self._stage_means[t][c] for c in self.comps]
        if t == 1:
            M = np.zeros((1 + len(self.comps), 1))
            m0 = np.array([1.0] + nxt)
            return M, m0
        M = np.diag([1.0] + nxt)
        m0 = np.zeros(1 + len(self.comps))
        return M, m0


def basis_moments(basis: BasisSpec, proc: ProcessSpec, t: int):
    """(mean vector, conditional-mean evaluator or None, second-moment
    matrix or None) for stage t."""
    mean = basis.mean(t)
    cond = None
    if t < proc.T:
        M, m0 = basis.cond_mean_map(t)

        def cond(history, _M=M, _m0=m0, _t=t):
            return _M @ basis.eval(_t, history) + _m0

    try:
        second = basis.second_moment(t)
    except UnsupportedMoment:
        second = None
    return mean, cond, second


# ---------------------------------------------------------------------------
# confidence intervals

_Z_CACHE = {}


def normal_quantile(p):
    if p not in _Z_CACHE:
        _Z_CACHE[p] = float(ndtri(p))
    return _Z_CACHE[p]


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    halfwidth: float
    level: float
    sample_size: int

    @property
    def lo(self):
        return self.mean - self.halfwidth

    @property
    def hi(self):
        return self.mean + self.halfwidth

    def __str__(self):
        return f"{self.mean:.1f} ± {self.halfwidth:.1f}"


def confidence_interval(values, level=0.95) -> ConfidenceInterval:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise TooFewSamples(f"need >= 2 values, got {values.size}")
    if not 0.0 < level < 1.0:
        raise ModelError("level must be in (0,1)")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    z = normal_quantile(0.5 * (1.0 + level))
    return ConfidenceInterval(mean, z * sd / np.sqrt(values.size), level, values.size)
