"""Deterministic online solver for bounded-frequency mixed packing/covering IPs.

Packing rows are known up front; covering constraints arrive one at a time.
On each arrival the solver picks, among the variable sets that cover the new
constraint while adding at most one unit of (1/k-scaled) load to every packing
row, the set minimising the exponential marginal cost

    tau(S) = sum_i rho**(F_i + Delta_i(S)) - rho**F_i

and commits it.  ``F_i`` is the accumulated load of row ``i`` over all sets
chosen so far.  With an offline solution of value one the loads stay below
``log_rho(gamma * m / (gamma - 1))``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CertificateError,
    InfeasibleStep,
    InstanceError,
    LoadLimitExceeded,
)

# slack when comparing a covering sum against 1 or a row increment against 1
FEAS_EPS = 1e-12
# relative tolerance under which two costs count as tied
TIE_REL = 1e-12

VarId = Hashable


@dataclass(frozen=True)
class PotentialParams:
    """Base ``rho`` of the exponential cost and the potential offset ``gamma``."""

    gamma: float = 2.0
    rho: float = 1.5

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.rho > 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")
        if self.rho > 1 + 1 / self.gamma + 1e-15:
            raise ValueError(
                f"rho={self.rho} exceeds 1 + 1/gamma={1 + 1 / self.gamma}; "
                "the potential is no longer monotone"
            )

    @property
    def log_rho(self) -> float:
        return math.log(self.rho)

    def load_cap(self, m: int) -> float:
        """Upper bound on every accumulated load F_i when an offline value-1 solution exists."""
        return math.log(self.gamma * m / (self.gamma - 1)) / self.log_rho


DEFAULT_PARAMS = PotentialParams()


class PackingSystem:
    """Column-oriented nonnegative packing matrix with lazily materialised variables.

    ``columns`` is either a mapping ``var -> [(row, coeff), ...]`` or a callable
    producing the column for a variable id.  Callable columns are memoised so
    repeated lookups return identical data.
    """

    def __init__(
        self,
        m: int,
        k: int,
        columns: Mapping[VarId, Sequence] | Callable[[VarId], Sequence],
    ):
        if int(m) != m or m < 1:
            raise InstanceError(f"m must be a positive integer, got {m}")
        if int(k) != k or k < 1:
            raise InstanceError(f"covering frequency k must be a positive integer, got {k}")
        self.m = int(m)
        self.k = int(k)
        self._source = columns
        self._cache: dict = {}

    def column(self, var: VarId) -> tuple[tuple[int, float], ...]:
        try:
            return self._cache[var]
        except KeyError:
            pass
        if callable(self._source):
            raw = self._source(var)
        else:
            try:
                raw = self._source[var]
            except KeyError:
                raise InstanceError(f"unknown variable {var!r}") from None
        if raw is None:
            raise InstanceError(f"unknown variable {var!r}")
        merged: dict[int, float] = {}
        for i, c in raw:
            i = int(i)
            c = float(c)
            if not 0 <= i < self.m:
                raise InstanceError(f"variable {var!r}: row {i} outside 0..{self.m - 1}")
            if not c >= 0:
                raise InstanceError(f"variable {var!r}: negative coefficient {c} in row {i}")
            if c > 0:
                merged[i] = merged.get(i, 0.0) + c
        col = tuple(sorted(merged.items()))
        self._cache[var] = col
        return col

    def variables(self):
        """Known variable ids (only the materialised ones for callable sources)."""
        if callable(self._source):
            return list(self._cache)
        return list(self._source)

    def delta_vector(self, S: Iterable[VarId]) -> np.ndarray:
        """Per-row increment sum_{r in S} P_ir / k, accumulated in sorted-id order."""
        acc = np.zeros(self.m)
        for var in sorted(S):
            for i, c in self.column(var):
                acc[i] += c / self.k
        return acc

    def load_vector(self, x: Iterable[VarId]) -> np.ndarray:
        """P x for the binary assignment with support ``x``."""
        acc = np.zeros(self.m)
        for var in sorted(x):
            for i, c in self.column(var):
                acc[i] += c
        return acc


@dataclass(frozen=True)
class CoveringConstraint:
    """Explicit covering row ``sum_r coeffs[r] x_r >= 1``."""

    coeffs: Mapping[VarId, float]
    index: int = 0

    def __post_init__(self):
        if not self.coeffs:
            raise InstanceError(f"covering constraint {self.index} has empty support")
        for var, c in self.coeffs.items():
            if not c > 0:
                raise InstanceError(
                    f"covering constraint {self.index}: coefficient of {var!r} must be positive, got {c}"
                )

    @property
    def support(self) -> tuple:
        return tuple(sorted(self.coeffs))

    def coverage(self, S: Iterable[VarId]) -> float:
        return sum(self.coeffs.get(var, 0.0) for var in sorted(S))

    def involves(self, var: VarId) -> bool:
        return var in self.coeffs


def delta(S: Iterable[VarId], i: int, sys: PackingSystem) -> float:
    """Load set ``S`` adds to packing row ``i``: sum over S of P_ir / k."""
    total = 0.0
    for var in sorted(S):
        for row, c in sys.column(var):
            if row == i:
                total += c / sys.k
    return total


def satisfies(S: Iterable[VarId], C, sys: PackingSystem) -> bool:
    """Whether ``S`` covers ``C`` and adds at most one unit to every packing row."""
    S = tuple(S)
    if C.coverage(S) < 1.0 - FEAS_EPS:
        return False
    return bool(np.all(sys.delta_vector(S) <= 1.0 + FEAS_EPS))


def tau_from_delta(F: np.ndarray, d: np.ndarray, log_rho: float) -> float:
    total = 0.0
    for f, x in zip(F.tolist(), d.tolist()):
        if x:
            total += math.exp(f * log_rho) * math.expm1(x * log_rho)
    return total


@dataclass
class SolverState:
    """Accumulated loads, chosen-set history and committed variables."""

    m: int
    F: np.ndarray = None
    history: list = field(default_factory=list)
    x: set = field(default_factory=set)
    step: int = 0
    frequency: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.F is None:
            self.F = np.zeros(self.m)


def tau(S: Iterable[VarId], state: SolverState, sys: PackingSystem, params: PotentialParams = DEFAULT_PARAMS) -> float:
    """Exponential marginal cost of adding ``S`` on top of the current loads."""
    return tau_from_delta(state.F, sys.delta_vector(S), params.log_rho)


class PlantedCertificate:
    """Binary solution of value one, used to track the potential function.

    Packing feasibility is verified on construction; each arriving covering
    constraint is verified as it is observed.
    """

    def __init__(self, sys: PackingSystem, xstar: Iterable[VarId]):
        self.sys = sys
        self.xstar = frozenset(xstar)
        load = sys.load_vector(self.xstar)
        if np.any(load > 1.0 + FEAS_EPS):
            worst = int(np.argmax(load))
            raise CertificateError(f"certificate loads packing row {worst} to {load[worst]:.6g} > 1")
        self.G = np.zeros(sys.m)

    def increment(self, C) -> np.ndarray:
        """Load contributed by certificate variables that appear in ``C``."""
        members = [r for r in sorted(self.xstar) if C.coverage((r,)) > 0]
        if C.coverage(members) < 1.0 - FEAS_EPS:
            raise CertificateError(f"certificate does not cover constraint {getattr(C, 'index', '?')}")
        return self.sys.delta_vector(members)

    def observe(self, C) -> np.ndarray:
        b = self.increment(C)
        self.G = self.G + b
        return b


def phi(state: SolverState, cert: PlantedCertificate, params: PotentialParams = DEFAULT_PARAMS) -> float:
    """Potential sum_i rho**F_i * (gamma - G_i)."""
    if cert is None:
        raise CertificateError("potential requires a planted certificate")
    if np.any(cert.G > 1.0 + 1e-9):
        raise CertificateError("certificate accumulated more than one unit on a packing row")
    total = 0.0
    for f, g in zip(state.F.tolist(), cert.G.tolist()):
        total += math.exp(f * params.log_rho) * (params.gamma - g)
    return total


def violation_profile(state: SolverState, sys: PackingSystem) -> np.ndarray:
    """P_i x for the committed variables; checks P_i x <= k F_i on every row."""
    load = sys.load_vector(state.x)
    slack = 1e-9 * np.maximum(1.0, sys.k * state.F)
    if np.any(load > sys.k * state.F + slack):
        i = int(np.argmax(load - sys.k * state.F))
        raise AssertionError(f"row {i}: P x = {load[i]} exceeds k F = {sys.k * state.F[i]}")
    return load


# An oracle maps (constraint, solver) to a tuple of variable ids, or None when
# no set satisfies the constraint.
Oracle = Callable[["CoveringConstraint", "OnlineSolver"], "tuple | None"]


@dataclass
class StepRecord:
    step: int
    chosen: tuple
    tau: float
    max_F: float
    max_violation: float
    phi: float | None


class OnlineSolver:
    """Algorithm state plus the arrive loop; one instance per online run."""

    def __init__(
        self,
        system: PackingSystem,
        params: PotentialParams = DEFAULT_PARAMS,
        certificate: PlantedCertificate | None = None,
        load_limit: float | None = None,
    ):
        self.system = system
        self.params = params
        self.certificate = certificate
        self.load_limit = load_limit
        self.state = SolverState(system.m)
        self.trace: list[StepRecord] = []
        self._violation = np.zeros(system.m)
        if certificate is not None:
            self._phi = phi(self.state, certificate, params)

    @property
    def m(self):
        return self.system.m

    @property
    def F(self) -> np.ndarray:
        return self.state.F

    def delta_vector(self, S) -> np.ndarray:
        return self.system.delta_vector(S)

    def tau(self, S) -> float:
        return tau(S, self.state, self.system, self.params)

    def satisfies(self, S, C) -> bool:
        return satisfies(S, C, self.system)

    def phi(self) -> float:
        return phi(self.state, self.certificate, self.params)

    def arrive(self, C, oracle: Oracle) -> tuple:
        """Serve one covering constraint; commitments are irrevocable."""
        self._check_frequency(C)
        chosen = oracle(C, self)
        if chosen is None:
            raise InfeasibleStep(f"no variable set satisfies constraint {getattr(C, 'index', self.state.step + 1)}")
        chosen = tuple(sorted(chosen))
        if not self.satisfies(chosen, C):
            raise InstanceError(f"oracle returned a set that does not satisfy constraint {getattr(C, 'index', '?')}")
        d = self.system.delta_vector(chosen)
        if self.load_limit is not None and np.any(self.state.F + d > self.load_limit):
            raise LoadLimitExceeded(
                f"committing would raise a load to {float(np.max(self.state.F + d)):.6g} "
                f"> limit {self.load_limit:.6g}"
            )
        cost = tau_from_delta(self.state.F, d, self.params.log_rho)
        if self.certificate is not None:
            self.certificate.observe(C)
        self._commit(C, chosen, d)
        new_phi = None
        if self.certificate is not None:
            new_phi = self.phi()
        self.trace.append(
            StepRecord(
                step=self.state.step,
                chosen=chosen,
                tau=cost,
                max_F=float(self.state.F.max()),
                max_violation=float(self._violation.max()),
                phi=new_phi,
            )
        )
        return chosen

    def _check_frequency(self, C):
        support = getattr(C, "support", None)
        if support is None:
            return
        for var in support:
            if self.state.frequency[var] + 1 > self.system.k:
                raise InstanceError(
                    f"variable {var!r} appears in more than k={self.system.k} covering constraints"
                )

    def _commit(self, C, chosen, d):
        st = self.state
        st.F = st.F + d
        st.history.append(chosen)
        for var in chosen:
            if var not in st.x:
                st.x.add(var)
                for i, c in self.system.column(var):
                    self._violation[i] += c
        support = getattr(C, "support", None)
        if support is not None:
            for var in support:
                st.frequency[var] += 1
        st.step += 1

    def violation_profile(self) -> np.ndarray:
        return violation_profile(self.state, self.system)

    def reconstruct_F(self) -> np.ndarray:
        """Recompute loads from the history in commit order."""
        F = np.zeros(self.m)
        for S in self.state.history:
            F = F + self.system.delta_vector(S)
        return F


def binarize(domain_max: int, column: Sequence | None = None):
    """Split an integer variable ranging up to ``domain_max`` into binary digits.

    Digit ``t`` (1-based) carries multiplier ``2**(t-1)``; its column is the
    original column scaled by that multiplier.  ``domain_max = 2**l`` yields
    ``l`` digits (one digit when ``domain_max`` is 1 or 2), which encode the
    values ``0 .. 2**l - 1``.
    """
    domain_max = int(domain_max)
    if domain_max < 1 or domain_max & (domain_max - 1):
        raise InstanceError(f"domain maximum must be a power of two, got {domain_max}")
    n_digits = max(1, domain_max.bit_length() - 1)
    digits = []
    for t in range(1, n_digits + 1):
        mult = 1 << (t - 1)
        scaled = None
        if column is not None:
            scaled = [(i, c * mult) for i, c in column]
        digits.append((mult, scaled))
    return digits


def to_digits(value: int, domain_max: int) -> tuple[int, ...]:
    """Binary digits (least significant first) of ``value`` in the encoding of :func:`binarize`."""
    n_digits = len(binarize(domain_max))
    if not 0 <= value < (1 << n_digits):
        raise InstanceError(f"value {value} not representable with {n_digits} digits")
    return tuple((value >> t) & 1 for t in range(n_digits))
