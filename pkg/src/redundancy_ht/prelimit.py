"""Pre-limit stochastic characterization: state configurations, geometric
segment laws, the matrix representation of the queue vector, and exact
sampling from it.

Conditionally on the ordered vector T of first type occurrences, the jobs
between consecutive first occurrences form independent geometric segments
(support {0, 1, ...}, P(X = n) = (1-p) p^n), each split multinomially over
the types seen so far. Scaling by the distance to criticality, segments at
critical prefixes become unit exponentials and all others vanish.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analytic import (_require_stable, h_term, idle_vector_weight,
                       iter_idle_server_tuples, iter_ordered_type_tuples, ordered_vector)
from .criticality import CriticalityReport
from .errors import DomainError
from .model import Scalar, SystemModel

DISCIPLINES = ("coc", "cos")


def _check_discipline(discipline: str):
    if discipline not in DISCIPLINES:
        raise DomainError(f"unknown discipline {discipline!r}; expected one of {DISCIPLINES}")


@lru_cache(maxsize=None)
def config_distribution(model: SystemModel, discipline: str = "coc") -> tuple:
    """Stationary distribution over ordered first-occurrence vectors.

    Returns (entries_tuples, probabilities) aligned by index; the empty
    vector is included. c.o.c. weights are h(T, 1); c.o.s. weights carry the
    extra ordered-idle-server factor k(T).
    """
    _check_discipline(discipline)
    _require_stable(model)
    ones = [1] * model.n_types
    entries_list, weights = [], []
    for entries in iter_ordered_type_tuples(model):
        w = h_term(model, entries, ones)
        if discipline == "cos":
            w = w * _idle_factor(model, entries)
        entries_list.append(entries)
        weights.append(w)
    total = sum(weights)
    return tuple(entries_list), tuple(w / total for w in weights)


def _idle_factor(model: SystemModel, entries) -> Scalar:
    """k(T): sum of ordered-idle-server weights over servers incompatible with T."""
    used = model.servers_of(entries)
    free = [s for s in range(1, model.n_servers + 1) if s not in used]
    return sum(idle_vector_weight(model, u)
               for u in iter_idle_server_tuples(model, allowed=free))


def config_prob(model: SystemModel, entries, discipline: str = "coc") -> Scalar:
    """Stationary probability that the first-occurrence vector equals `entries`."""
    entries = tuple(entries)
    all_entries, probs = config_distribution(model, discipline)
    try:
        return probs[all_entries.index(entries)]
    except ValueError:
        raise DomainError(f"{entries} is not an ordered vector of distinct types") from None


@dataclass(frozen=True)
class SegmentLaw:
    """Geometric parameters for one ordered vector T.

    segment_params[j-1] is p^{T,j} = N lam p(T,j)/mu(T,j); type_params[j-1][i-1]
    the marginal geometric parameter of type T_i within segment j; and
    split_fractions[j-1][i-1] = p_{T_i}/p(T,j) the multinomial fractions.
    """

    entries: tuple
    segment_params: tuple
    type_params: tuple
    split_fractions: tuple


def segment_law(model: SystemModel, entries) -> SegmentLaw:
    entries = tuple(entries)
    vec = ordered_vector(model, entries, frozenset())
    n, lam = model.n_servers, model.lam
    seg, typ, split = [], [], []
    for j in range(1, len(entries) + 1):
        p_j, mu_j = vec.prefix_p[j - 1], vec.prefix_mu[j - 1]
        b = n * lam * p_j / mu_j
        if not 0 < b < 1:
            raise DomainError(f"segment parameter {b} outside (0,1); model unstable?")
        seg.append(b)
        row_t, row_s = [], []
        for i in range(1, j + 1):
            a = n * lam * model.p[entries[i - 1]] / mu_j
            row_t.append(a / (1 - b + a))
            row_s.append(model.p[entries[i - 1]] / p_j)
        typ.append(tuple(row_t))
        split.append(tuple(row_s))
    return SegmentLaw(entries=entries, segment_params=tuple(seg),
                      type_params=tuple(typ), split_fractions=tuple(split))


def sample_prelimit(model: SystemModel, discipline: str, n: int, seed,
                    return_configs: bool = False):
    """Draw n exact samples of the per-type queue-length vector.

    For c.o.c. this is the vector of all jobs per type; for c.o.s. the vector
    of waiting jobs per type. Sampling draws the configuration T from its
    exact distribution, independent geometric segment totals, and multinomial
    splits; the per-type counts are 1{S in T} plus the split sums.
    """
    if n < 1:
        raise DomainError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    entries_list, probs = config_distribution(model, discipline)
    fprobs = np.asarray([float(p) for p in probs])
    fprobs = fprobs / fprobs.sum()
    counts = rng.multinomial(n, fprobs)
    out = np.zeros((n, model.n_types), dtype=np.int64)
    config_idx = np.zeros(n, dtype=np.int64)
    row = 0
    for idx, (entries, m) in enumerate(zip(entries_list, counts)):
        if m == 0:
            continue
        block = slice(row, row + m)
        config_idx[block] = idx
        for t in entries:
            out[block, t] += 1
        if entries:
            law = segment_law(model, entries)
            for j, b in enumerate(law.segment_params, start=1):
                totals = rng.geometric(1.0 - float(b), size=m) - 1
                fracs = np.asarray([float(f) for f in law.split_fractions[j - 1]])
                splits = rng.multinomial(totals, fracs / fracs.sum())
                for i, t in enumerate(entries[:j]):
                    out[block, t] += splits[:, i]
        row += m
    if return_configs:
        return out, config_idx, entries_list
    return out


@dataclass(frozen=True)
class RepresentationMatrices:
    """P(T), W(T) and the indicator vector of the queue-vector representation.

    P is the |S| x |S| permutation aligning T-order rows to type order
    (absent types padded in ascending index order); W is |S| x k with
    W[i-1][l-1] = p_{T_i}/p(T, i_l) for i <= i_l; the conditional limit of
    the scaled queue vector given T is P W U with U the i.i.d. exponentials.
    """

    entries: tuple
    P: np.ndarray
    W: tuple
    indicator: np.ndarray


def representation_matrices(model: SystemModel, report: CriticalityReport,
                            entries) -> RepresentationMatrices:
    entries = tuple(entries)
    vec = ordered_vector(model, entries, report.critical_subsets)
    s = model.n_types
    perm = np.zeros((s, s), dtype=np.int64)
    tbar = [t for t in model.type_indices if t not in entries]
    for j, t in enumerate(entries):
        perm[t, j] = 1
    for j, t in enumerate(tbar, start=len(entries)):
        perm[t, j] = 1
    w_rows = []
    for i in range(1, s + 1):
        row = []
        for i_l in vec.cr_indices:
            if i <= i_l and i <= len(entries):
                row.append(model.p[entries[i - 1]] / vec.prefix_p[i_l - 1])
            else:
                row.append(0)
        w_rows.append(tuple(row))
    indicator = np.asarray([1 if t in entries else 0 for t in model.type_indices],
                           dtype=np.int64)
    return RepresentationMatrices(entries=entries, P=perm, W=tuple(w_rows),
                                  indicator=indicator)


def limit_segment_laws(model: SystemModel, report: CriticalityReport, entries):
    """Per-segment limit markers and the conditional limit coefficients P(T) W(T).

    Returns (kinds, matrices) where kinds[j-1] is "exponential" when prefix j
    is critical and "vanishing" otherwise, and matrices is the
    RepresentationMatrices bundle; conditionally on T the scaled queue vector
    converges to P(T) W(T) U(k).
    """
    entries = tuple(entries)
    vec = ordered_vector(model, entries, report.critical_subsets)
    kinds = tuple("exponential" if j in vec.cr_indices else "vanishing"
                  for j in range(1, len(entries) + 1))
    return kinds, representation_matrices(model, report, entries)


def expected_type_counts(model: SystemModel, discipline: str = "coc") -> tuple:
    """Exact per-type stationary means: E[Q_S] (c.o.c.) or E[Qtilde_S] (c.o.s.).

    Conditional on T, type S contributes 1{S in T} plus a geometric mean
    p/(1-p) for every segment from its first occurrence onward.
    """
    entries_list, probs = config_distribution(model, discipline)
    means = [0] * model.n_types
    for entries, prob in zip(entries_list, probs):
        if not entries:
            continue
        law = segment_law(model, entries)
        for i, t in enumerate(entries, start=1):
            acc = 1
            for j in range(i, len(entries) + 1):
                a = law.type_params[j - 1][i - 1]
                acc = acc + a / (1 - a)
            means[t] = means[t] + prob * acc
    return tuple(means)


def conditional_limit_coeffs(model: SystemModel, report: CriticalityReport, entries):
    """P(T) W(T) as an exact |S| x k matrix of Scalars (rows in type order)."""
    mats = representation_matrices(model, report, entries)
    s = model.n_types
    k = len(mats.W[0]) if mats.W else 0
    out = [[0] * k for _ in range(s)]
    for trow in range(s):
        jcol = int(np.argmax(mats.P[trow]))
        for l in range(k):
            out[trow][l] = mats.W[jcol][l]
    return tuple(tuple(r) for r in out)
