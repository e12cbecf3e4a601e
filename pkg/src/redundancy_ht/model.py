"""Parallel-server system model: servers, job types, arrival rates.

A system has N servers with speeds mu_n and a Poisson arrival stream of
total rate N*lambda. Each job carries a type S, a nonempty subset of the
servers it may be processed by; a fraction p_S of jobs is of type S.

Numbers are kept in whichever backend they arrive in: `fractions.Fraction`
for exact work (criticality decisions, identity tests) or plain floats.
All operations here are generic over the two.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import DomainError, ModelError

Scalar = Union[Fraction, int, float]

PROB_TOL = 1e-12  # |sum p_S - 1| tolerance for float inputs
MODEL_FORMAT_VERSION = 1


def parse_scalar(value) -> Scalar:
    """Parse a JSON-ish numeric value: strings become exact Fractions, bare numbers floats."""
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, bool):
        raise ModelError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    raise ModelError(f"not a number: {value!r}")


def scalar_str(x: Scalar) -> str:
    """Serialize a scalar; exact values round-trip as rational strings."""
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def is_exact(x: Scalar) -> bool:
    return isinstance(x, (Fraction, int))


def type_label(servers: Iterable[int]) -> str:
    return ",".join(str(n) for n in sorted(servers))


@dataclass(frozen=True)
class SystemModel:
    """Immutable system description.

    Attributes
    ----------
    mu : tuple of Scalar
        Server speeds, indexed by server id - 1 (servers are 1..N).
    lam : Scalar
        Per-server arrival rate lambda; total arrival rate is N*lambda.
    job_types : tuple of frozenset of int
        Compatible-server sets, one per job type, pairwise distinct.
    p : tuple of Scalar
        Arrival fractions per job type, summing to one.
    """

    mu: tuple
    lam: Scalar
    job_types: tuple
    p: tuple

    def __post_init__(self):
        if not self.mu:
            raise ModelError("need at least one server")
        if any(m <= 0 for m in self.mu):
            raise ModelError("all server speeds must be positive")
        if self.lam <= 0:
            raise ModelError("lambda must be positive")
        if not self.job_types:
            raise ModelError("need at least one job type")
        if len(self.job_types) != len(self.p):
            raise ModelError("job_types and p length mismatch")
        n = len(self.mu)
        seen = set()
        for servers in self.job_types:
            if not servers:
                raise ModelError("job type with empty server set")
            if not all(1 <= s <= n for s in servers):
                raise ModelError(f"job type {set(servers)} references unknown servers")
            if servers in seen:
                raise ModelError(f"duplicate job type {{{type_label(servers)}}}")
            seen.add(servers)
        if any(ps <= 0 for ps in self.p):
            raise ModelError("all p_S must be positive")
        total = sum(self.p)
        if all(is_exact(ps) for ps in self.p):
            if total != 1:
                raise ModelError(f"p_S must sum to 1 exactly, got {total}")
        elif abs(total - 1) > PROB_TOL:
            raise ModelError(f"p_S must sum to 1, got {total!r}")

    @property
    def n_servers(self) -> int:
        return len(self.mu)

    @property
    def n_types(self) -> int:
        return len(self.job_types)

    @property
    def type_indices(self) -> range:
        return range(len(self.job_types))

    @property
    def mu_bar(self) -> Scalar:
        """Average service speed (1/N) * sum mu_n; derived, never stored."""
        total = sum(self.mu)
        if is_exact(total):
            return Fraction(total, len(self.mu))
        return total / len(self.mu)

    def servers_of(self, type_set: Iterable[int]) -> frozenset:
        """Union of compatible servers over the given type indices."""
        servers = set()
        for t in type_set:
            servers |= self.job_types[t]
        return frozenset(servers)

    def p_of(self, type_set: Iterable[int]) -> Scalar:
        return sum(self.p[t] for t in type_set)

    def mu_of(self, type_set: Iterable[int]) -> Scalar:
        """Aggregate speed of all servers compatible with at least one type in the set."""
        return sum(self.mu[n - 1] for n in self.servers_of(type_set))

    def arrival_rate(self, t: int) -> Scalar:
        """lambda_S = N * lambda * p_S for type index t."""
        return self.n_servers * self.lam * self.p[t]

    def labels(self) -> list:
        return [type_label(s) for s in self.job_types]

    def with_lambda(self, lam: Scalar) -> "SystemModel":
        return replace(self, lam=lam)

    def as_float(self) -> "SystemModel":
        return SystemModel(
            mu=tuple(float(m) for m in self.mu),
            lam=float(self.lam),
            job_types=self.job_types,
            p=tuple(float(ps) for ps in self.p),
        )


def aggregate(model: SystemModel, type_set: Iterable[int]):
    """Return (p(T), mu(T)) for a nonempty subset T of job-type indices.

    mu(T) counts each compatible server exactly once.
    """
    type_set = frozenset(type_set)
    if not type_set:
        raise DomainError("aggregate of an empty set of job types")
    if not type_set <= set(model.type_indices):
        raise DomainError(f"unknown type indices {sorted(type_set - set(model.type_indices))}")
    return model.p_of(type_set), model.mu_of(type_set)


@dataclass(frozen=True)
class TrajectorySpec:
    """Direction and position on a heavy-traffic trajectory.

    The arrival-rate vector is lambda_S(eps) = N*lambda* p_S - eps*gamma_S
    with all gamma_S > 0. The default trajectory gamma_S = N*lambda* p_S
    recovers plain lambda scaling with eps = 1 - lambda/lambda*.
    """

    gamma: tuple
    epsilon: Scalar

    def __post_init__(self):
        if any(g <= 0 for g in self.gamma):
            raise ModelError("all gamma_S must be positive")
        if self.epsilon < 0:
            raise ModelError("epsilon must be nonnegative")

    def gamma_of(self, type_set: Iterable[int]) -> Scalar:
        return sum(self.gamma[t] for t in type_set)


def default_trajectory(model: SystemModel, lam_star: Scalar) -> TrajectorySpec:
    """gamma_S = N*lambda* p_S, eps = 1 - lambda/lambda* (the fixed-direction ray)."""
    n = model.n_servers
    gamma = tuple(n * lam_star * ps for ps in model.p)
    return TrajectorySpec(gamma=gamma, epsilon=1 - model.lam / lam_star)


def effective_rates(model: SystemModel, traj: TrajectorySpec, lam_star: Scalar = None) -> tuple:
    """Per-type arrival rates lambda_S(eps) = N*lambda* p_S - eps*gamma_S.

    Raises DomainError naming the offending type if any rate is nonpositive.
    """
    if lam_star is None:
        from .criticality import critical_rate

        lam_star = critical_rate(model)
    if len(traj.gamma) != model.n_types:
        raise ModelError("gamma length does not match the number of job types")
    n = model.n_servers
    rates = []
    for t in model.type_indices:
        rate = n * lam_star * model.p[t] - traj.epsilon * traj.gamma[t]
        if rate <= 0:
            raise DomainError(
                f"lambda_S(eps) <= 0 for type {{{type_label(model.job_types[t])}}}: {rate}"
            )
        rates.append(rate)
    return tuple(rates)


def model_at_trajectory(model: SystemModel, traj: TrajectorySpec, lam_star: Scalar = None) -> SystemModel:
    """The pre-limit system with arrival rates lambda_S(eps): new lambda and p vector."""
    rates = effective_rates(model, traj, lam_star)
    total = sum(rates)
    n = model.n_servers
    return SystemModel(
        mu=model.mu,
        lam=total / n,
        job_types=model.job_types,
        p=tuple(r / total for r in rates),
    )


def _parse_gamma(raw: Mapping, job_types: Sequence[frozenset]) -> tuple:
    by_label = {type_label(s): i for i, s in enumerate(job_types)}
    gamma = [None] * len(job_types)
    for key, val in raw.items():
        if key not in by_label:
            raise ModelError(f"trajectory.gamma key {key!r} matches no job type")
        gamma[by_label[key]] = parse_scalar(val)
    missing = [lbl for lbl, i in by_label.items() if gamma[i] is None]
    if missing:
        raise ModelError(f"trajectory.gamma missing entries for types {missing}")
    return tuple(gamma)


def load_model(path) -> tuple:
    """Load a model file; returns (SystemModel, TrajectorySpec | None).

    Format::

        { "servers": [{"id": 1, "mu": "1"}, ...],
          "types":   [{"servers": [1, 2], "p": "1/2"}, ...],
          "lambda":  "0.45",
          "trajectory": {"gamma": {"1,2": "1", ...}, "epsilon": "0.02"} }

    Numeric strings parse as exact rationals, bare numbers as floats.
    Duplicate type subsets are rejected, not merged.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read model file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_model(raw, where=str(path))


def parse_model(raw: Mapping, where: str = "<model>") -> tuple:
    for key in ("servers", "types", "lambda"):
        if key not in raw:
            raise ModelError(f"{where}: missing field {key!r}")
    unknown = set(raw) - {"servers", "types", "lambda", "trajectory"}
    if unknown:
        raise ModelError(f"{where}: unknown fields {sorted(unknown)}")
    servers = raw["servers"]
    ids = [s["id"] for s in servers]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise ModelError(f"{where}: server ids must be exactly 1..N, got {ids}")
    mu = [None] * len(ids)
    for s in servers:
        mu[s["id"] - 1] = parse_scalar(s["mu"])
    job_types, p = [], []
    for t in raw["types"]:
        job_types.append(frozenset(t["servers"]))
        p.append(parse_scalar(t["p"]))
    model = SystemModel(mu=tuple(mu), lam=parse_scalar(raw["lambda"]),
                        job_types=tuple(job_types), p=tuple(p))
    traj = None
    if "trajectory" in raw:
        tr = raw["trajectory"]
        traj = TrajectorySpec(gamma=_parse_gamma(tr["gamma"], model.job_types),
                              epsilon=parse_scalar(tr["epsilon"]))
    return model, traj


def dump_model(model: SystemModel, traj: TrajectorySpec = None) -> dict:
    out = {
        "servers": [{"id": n + 1, "mu": scalar_str(m)} for n, m in enumerate(model.mu)],
        "types": [{"servers": sorted(s), "p": scalar_str(ps)}
                  for s, ps in zip(model.job_types, model.p)],
        "lambda": scalar_str(model.lam),
    }
    if traj is not None:
        out["trajectory"] = {
            "gamma": {type_label(s): scalar_str(g)
                      for s, g in zip(model.job_types, traj.gamma)},
            "epsilon": scalar_str(traj.epsilon),
        }
    return out
