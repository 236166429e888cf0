# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Discrete time adapted processes and martingales on finite filtered spaces.

Processes are stored as arrays of shape (N + 1, n_atoms, d). The martingale
decomposition projects, node by node, the one step increments of a martingale
onto the increments of the driving martingales (a random walk and compensated
jump indicators) under the node conditional inner product.

"""

import math
from collections.abc import Callable, Sequence

import numpy as np
from atom.api import Atom, Str, Tuple, Typed

from .errors import (
    DegenerateDriverError,
    DimensionError,
    MeasurabilityError,
    ParameterError,
)
from .l0algebra import glue, raw_values
from .probspace import (
    FilteredSpace,
    L0Value,
    PartitionLike,
    block_average,
    cond_expect,
    is_measurable,
    random_value,
)
from .reporting import CheckReport
from .rnmodule import CondNorm, cond_norm

#: Absolute tolerance (scaled by the magnitude of the values) on adaptedness.
ADAPTEDNESS_TOLERANCE = 1e-10

#: Absolute tolerance (scaled by the magnitude of the values) on the martingale
#: identity.
MARTINGALE_TOLERANCE = 1e-12


def _scale(array: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(array), initial=0.0)))


class AdaptedProcess(Atom):
    """Process whose value at time t_k is measurable w.r.t. partitions[k]."""

    space = Typed(FilteredSpace)

    #: Values of shape (N + 1, n_atoms, d).
    values = Typed(np.ndarray)

    #: Free form name used in reports and outputs.
    label = Str()

    def __init__(self, space: FilteredSpace, values, *, label: str = "") -> None:
        array = np.array(values, dtype=float, copy=True)
        if array.ndim == 2:
            array = array[:, :, None]
        expected = (space.n_steps + 1, space.n_atoms)
        if array.ndim != 3 or array.shape[:2] != expected:
            raise DimensionError(
                f"Expected process values of shape {expected} + (d,), got {array.shape}"
            )
        tolerance = ADAPTEDNESS_TOLERANCE * _scale(array)
        for k, partition in enumerate(space.partitions):
            snapped = array[k][partition.representatives]
            if not np.allclose(array[k], snapped, rtol=0.0, atol=tolerance):
                raise MeasurabilityError(
                    f"Process value at time index {k} is not measurable w.r.t. "
                    f"partition {k}"
                )
            array[k] = snapped
        array.flags.writeable = False
        super().__init__(space=space, values=array, label=label)
        self._validate()

    def _validate(self) -> None:
        pass

    @classmethod
    def from_values(
        cls, values: Sequence[L0Value], *, label: str = ""
    ) -> "AdaptedProcess":
        if not values:
            raise ParameterError("A process needs at least one value")
        return cls(values[0].space, np.stack([v.values for v in values]), label=label)

    @classmethod
    def zeros(cls, space: FilteredSpace, dim: int = 1, *, label: str = ""):
        return cls(space, np.zeros((space.n_steps + 1, space.n_atoms, dim)), label=label)

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    def at(self, k: int) -> L0Value:
        """Value at grid index k."""
        return L0Value(self.space, self.values[k])

    @property
    def initial(self) -> L0Value:
        return self.at(0)

    @property
    def terminal(self) -> L0Value:
        return self.at(self.n_steps)

    def increments(self) -> np.ndarray:
        """One step increments, shape (N, n_atoms, d)."""
        return np.diff(self.values, axis=0)

    def running_max(self) -> np.ndarray:
        """Per atom maximum over the grid of the Euclidean norm of the values."""
        return np.max(np.linalg.norm(self.values, axis=2), axis=0)

    def _operand(self, other) -> np.ndarray:
        if isinstance(other, AdaptedProcess):
            if other.space is not self.space:
                raise DimensionError("Processes live on different spaces")
            return other.values
        if isinstance(other, L0Value):
            if other.space is not self.space:
                raise DimensionError("Value and process live on different spaces")
            return other.values[None, :, :]
        return np.asarray(other, dtype=float)

    def _linear(self, other, additive: bool) -> bool:
        """Whether combining with other keeps a martingale a martingale."""
        if isinstance(other, AdaptedProcess):
            return additive and isinstance(other, MartingaleProcess)
        if isinstance(other, L0Value):
            return is_measurable(other, 0)
        return np.ndim(other) == 0

    def _result(self, values, other, *, additive: bool):
        martingale = isinstance(self, MartingaleProcess) and self._linear(other, additive)
        cls = MartingaleProcess if martingale else AdaptedProcess
        return cls(self.space, values)

    def __add__(self, other):
        return self._result(self.values + self._operand(other), other, additive=True)

    __radd__ = __add__

    def __sub__(self, other):
        return self._result(self.values - self._operand(other), other, additive=True)

    def __rsub__(self, other):
        return self._result(self._operand(other) - self.values, other, additive=True)

    def __mul__(self, other):
        return self._result(self.values * self._operand(other), other, additive=False)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.space, -self.values, label=self.label)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(label={self.label!r}, steps={self.n_steps}, "
            f"dim={self.dim})"
        )


class MartingaleProcess(AdaptedProcess):
    """Adapted process satisfying E[M_{k+1} | partitions[k]] = M_k."""

    def _validate(self) -> None:
        tolerance = MARTINGALE_TOLERANCE * _scale(self.values)
        for k in range(self.n_steps):
            expected = block_average(self.space, self.values[k + 1], k)
            gap = float(np.max(np.abs(expected - self.values[k])))
            if gap > tolerance:
                raise MeasurabilityError(
                    f"Martingale identity fails between time indices {k} and "
                    f"{k + 1} (gap {gap:.3e})"
                )

    @property
    def starts_at_zero(self) -> bool:
        return not np.any(self.values[0])


@glue.register
def _(element: AdaptedProcess, masks, elements) -> AdaptedProcess:
    values = np.zeros_like(element.values)
    for mask, member in zip(masks, elements):
        if member.space is not element.space or member.dim != element.dim:
            raise DimensionError("Glued processes must share space and dimension")
        values[:, mask] = member.values[:, mask]
    kinds = {type(member) for member in elements}
    cls = MartingaleProcess if kinds == {MartingaleProcess} else AdaptedProcess
    return cls(element.space, values, label=element.label)


@raw_values.register
def _(element: AdaptedProcess) -> np.ndarray:
    return element.values


@cond_norm.register
def _(x: AdaptedProcess, norm: CondNorm) -> L0Value:
    if x.space is not norm.space:
        raise DimensionError("The process and the norm live on different spaces")
    return L0Value(norm.space, norm.reduce(x.running_max()))


def sp_norm(Y: AdaptedProcess, p: float = 2.0, base: PartitionLike = 0) -> L0Value:
    """S^p conditional norm: conditional L^p norm of the running maximum of |Y|."""
    return cond_norm(Y, CondNorm(Y.space, p, base))


def conditional_expectations(V: L0Value) -> np.ndarray:
    """E[V | partitions[k]] for every grid index k, shape (N + 1, n_atoms, d)."""
    space = V.space
    return np.stack(
        [block_average(space, V.values, partition) for partition in space.partitions]
    )


def martingale_from_terminal(V: L0Value) -> MartingaleProcess:
    """M_t = E_0(V) - E_t(V), the martingale attached to a terminal value V.

    Raises
    ------
    MeasurabilityError
        If V is not measurable w.r.t. the finest partition of its space.

    """
    if not is_measurable(V, -1):
        raise MeasurabilityError("V must be measurable w.r.t. the finest partition")
    expectations = conditional_expectations(V)
    expectations[-1] = V.values
    return MartingaleProcess(V.space, expectations[0][None] - expectations, label="M")


def random_martingale(
    space: FilteredSpace, rng: np.random.Generator, dim: int = 1, scale: float = 1.0
) -> MartingaleProcess:
    """Martingale started at zero from a Gaussian terminal value."""
    return martingale_from_terminal(random_value(space, rng, dim=dim, scale=scale))


def random_process(
    space: FilteredSpace, rng: np.random.Generator, dim: int = 1, scale: float = 1.0
) -> AdaptedProcess:
    """Gaussian adapted process, values[k] constant on the blocks of partitions[k]."""
    values = rng.normal(scale=scale, size=(space.n_steps + 1, space.n_atoms, dim))
    for k, partition in enumerate(space.partitions):
        values[k] = values[k][partition.representatives]
    return AdaptedProcess(space, values, label="Y")


def doob_constant(p: float) -> float:
    """C_p = p / (p - 1), and 1 for p = inf."""
    p = float(p)
    if not p > 1.0:
        raise ParameterError(f"The exponent p must be > 1, got {p}")
    return 1.0 if math.isinf(p) else p / (p - 1.0)


def doob_check(
    M: MartingaleProcess, p: float, *, tolerance: float = 1e-10
) -> CheckReport:
    """Conditional Doob maximal inequality |||M|||_p <= p/(p-1) |||M_T|||_p.

    For p = inf both sides are equal and the report measures the two sided gap.

    """
    norm = CondNorm(M.space, p)
    lhs = cond_norm(M, norm).scalar
    rhs = cond_norm(M.terminal, norm).scalar
    scale = max(1.0, float(np.max(rhs)))
    report = CheckReport(name=f"doob p={p:g}", tolerance=tolerance)
    if norm.is_infinite:
        report.check(float(np.max(np.abs(lhs - rhs))) / scale, "sup equality")
    else:
        constant = doob_constant(norm.p)
        report.check(max(0.0, float(np.max(lhs - constant * rhs))) / scale, "maximal")
    return report


def _child_probability(space: FilteredSpace, k: int, branch: int) -> np.ndarray:
    """Per atom conditional probability of the child with a given branch index."""
    node = space.partitions[k]
    selected = space.branches[:, k] == branch
    mass = np.bincount(
        node.labels, weights=space.weights * selected, minlength=node.n_blocks
    )
    total = np.bincount(node.labels, weights=space.weights, minlength=node.n_blocks)
    return (mass / total)[node.labels]


def basis_drivers(space: FilteredSpace) -> list[MartingaleProcess]:
    """Random walk W and compensated mark indicators N_1, ..., N_m of a tree.

    Children 0 and 1 of a node move the walk by +sqrt(dt * p1 / p0) and
    -sqrt(dt * p0 / p1), which reduces to +-sqrt(dt) for even probabilities.
    Child 1 + x carries mark x, the compensated increment being 1{mark x} - p_x.

    """
    n, steps = space.n_atoms, space.n_steps
    walk = np.zeros((steps + 1, n))
    marks = np.zeros((space.marks, steps + 1, n))
    root = np.sqrt(space.dt)
    for k in range(steps):
        branch = space.branches[:, k]
        p0 = _child_probability(space, k, 0)
        p1 = _child_probability(space, k, 1)
        both = p1 > 0
        ratio = np.divide(p1, p0, out=np.zeros(n), where=both)
        step = np.zeros(n)
        step[(branch == 0) & both] = root * np.sqrt(ratio[(branch == 0) & both])
        step[(branch == 1) & both] = -root / np.sqrt(ratio[(branch == 1) & both])
        walk[k + 1] = walk[k] + step
        for x in range(space.marks):
            px = _child_probability(space, k, 2 + x)
            marks[x, k + 1] = marks[x, k] + (branch == 2 + x) - px
    drivers = [MartingaleProcess(space, walk, label="W")]
    drivers.extend(
        MartingaleProcess(space, marks[x], label=f"N{x + 1}") for x in range(space.marks)
    )
    return drivers


def mark_intensities(space: FilteredSpace) -> np.ndarray:
    """Intensity mu_x = p_x / dt of every mark, per step and atom, shape (N, n, m)."""
    table = np.zeros((space.n_steps, space.n_atoms, space.marks))
    for k in range(space.n_steps):
        for x in range(space.marks):
            table[k, :, x] = _child_probability(space, k, 2 + x) / space.dt
    return table


class Decomposition(Atom):
    """Projection of a martingale on driving martingales plus an orthogonal rest.

    M_t = M_0 + sum_{s<t} sum_i theta_{s,i} dD_{s,i} + (K_t - K_0), with K_0 = M_0.

    """

    #: The decomposed martingale.
    martingale = Typed(MartingaleProcess)

    #: Driving martingales, scalar and started at zero.
    drivers = Tuple(MartingaleProcess)

    #: Predictable coefficients, shape (N, n_atoms, n_drivers, d).
    coefficients = Typed(np.ndarray)

    #: Remainder martingale orthogonal to the drivers.
    remainder = Typed(MartingaleProcess)

    #: Node Gram matrices of the driver increments, shape (N, n_atoms, m, m).
    gram = Typed(np.ndarray)

    def _driver_index(self, label: str) -> list[int]:
        return [i for i, d in enumerate(self.drivers) if d.label == label]

    @property
    def z(self) -> np.ndarray:
        """Coefficient on the random walk, shape (N, n_atoms, d)."""
        index = self._driver_index("W") or [0]
        return self.coefficients[:, :, index[0], :]

    @property
    def u(self) -> np.ndarray:
        """Coefficients on the other drivers, shape (N, n_atoms, m - 1, d)."""
        index = self._driver_index("W") or [0]
        others = [i for i in range(len(self.drivers)) if i != index[0]]
        return self.coefficients[:, :, others, :]

    @property
    def k(self) -> MartingaleProcess:
        return self.remainder

    def reconstruct(self) -> MartingaleProcess:
        """Rebuild the martingale from coefficients, drivers and remainder."""
        integral = stochastic_integral(self.coefficients, list(self.drivers))
        return MartingaleProcess(
            self.martingale.space, integral.values + self.remainder.values
        )


def _driver_increments(drivers: Sequence[MartingaleProcess]) -> np.ndarray:
    if not drivers:
        raise ParameterError("At least one driver is required")
    space = drivers[0].space
    for driver in drivers:
        if driver.space is not space:
            raise DimensionError("Drivers live on different spaces")
        if driver.dim != 1:
            raise DimensionError("Drivers must be scalar martingales")
        if not driver.starts_at_zero:
            raise ParameterError(f"Driver {driver.label!r} does not start at zero")
    return np.stack([d.increments()[:, :, 0] for d in drivers], axis=-1)


def stochastic_integral(
    coefficients: np.ndarray, drivers: Sequence[MartingaleProcess]
) -> MartingaleProcess:
    """sum_{s<t} sum_i theta_{s,i} dD_{s,i} for predictable coefficients.

    Coefficients have shape (N, n_atoms, n_drivers, d) and are snapped to the
    blocks of partitions[s] after validation.

    """
    increments = _driver_increments(drivers)
    space = drivers[0].space
    theta = np.array(coefficients, dtype=float, copy=True)
    if theta.ndim == 3:
        theta = theta[..., None]
    if theta.shape[:3] != increments.shape:
        raise DimensionError(
            f"Expected coefficients of shape {increments.shape} + (d,), got {theta.shape}"
        )
    tolerance = ADAPTEDNESS_TOLERANCE * _scale(theta)
    for s in range(space.n_steps):
        snapped = theta[s][space.partitions[s].representatives]
        if not np.allclose(theta[s], snapped, rtol=0.0, atol=tolerance):
            raise MeasurabilityError(f"Coefficients at step {s} are not predictable")
        theta[s] = snapped
    steps = np.einsum("sai,said->sad", increments, theta)
    values = np.concatenate([np.zeros((1,) + steps.shape[1:]), np.cumsum(steps, axis=0)])
    return MartingaleProcess(space, values)


def project_step(
    space: FilteredSpace, k: int, D: np.ndarray, dX: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise projection of one step increments on driver increments.

    Parameters
    ----------
    space : FilteredSpace
        Space the increments live on.
    k : int
        Step index, the nodes being the blocks of partitions[k].
    D : np.ndarray
        Driver increments on the step, shape (n_atoms, m).
    dX : np.ndarray
        Increments to project, shape (n_atoms, d).

    Returns
    -------
    coefficients : np.ndarray
        Per atom projection coefficients, shape (n_atoms, m, d), zero at nodes
        with a single child.
    gram : np.ndarray
        Per atom node Gram matrix, shape (n_atoms, m, m).

    Raises
    ------
    DegenerateDriverError
        If the driver increments at a node with several children are linearly
        dependent under the node conditional inner product.

    """
    node = space.partitions[k]
    children = space.partitions[k + 1]
    weights = space.conditional_weights(node)
    n_drivers = D.shape[1]
    gram = np.zeros((node.n_blocks, n_drivers, n_drivers))
    rhs = np.zeros((node.n_blocks, n_drivers, dX.shape[1]))
    np.add.at(gram, node.labels, np.einsum("a,ai,aj->aij", weights, D, D))
    np.add.at(rhs, node.labels, np.einsum("a,ai,ad->aid", weights, D, dX))
    n_children = np.zeros(node.n_blocks, dtype=np.int64)
    np.add.at(n_children, node.labels[children.leaders], 1)
    active = n_children > 1
    for b in np.flatnonzero(active):
        if np.linalg.cond(gram[b]) > 1e12:
            raise DegenerateDriverError(
                f"Driver increments are degenerate at step {k}, node {b}", k, int(b)
            )
    solution = np.zeros_like(rhs)
    if np.any(active):
        solution[active] = np.linalg.solve(gram[active], rhs[active])
    return solution[node.labels], gram[node.labels]


def martingale_decompose(
    M: MartingaleProcess, drivers: Sequence[MartingaleProcess]
) -> Decomposition:
    """Decompose M along the drivers by node-wise weighted least squares.

    Raises
    ------
    DegenerateDriverError
        If the driver increments at a node with several children are linearly
        dependent under the node conditional inner product.

    """
    increments = _driver_increments(drivers)
    space = M.space
    if drivers[0].space is not space:
        raise DimensionError("The martingale and the drivers live on different spaces")
    n_drivers = increments.shape[2]
    dM = M.increments()
    theta = np.zeros(dM.shape[:2] + (n_drivers, M.dim))
    gram = np.zeros(dM.shape[:2] + (n_drivers, n_drivers))
    for k in range(space.n_steps):
        theta[k], gram[k] = project_step(space, k, increments[k], dM[k])
    rest = dM - np.einsum("sai,said->sad", increments, theta)
    remainder = np.concatenate([M.values[:1], M.values[:1] + np.cumsum(rest, axis=0)])
    return Decomposition(
        martingale=M,
        drivers=tuple(drivers),
        coefficients=theta,
        remainder=MartingaleProcess(space, remainder, label="K"),
        gram=gram,
    )


def isometry_residual(decomposition: Decomposition) -> float:
    """Largest gap in the conditional isometry of a decomposition.

    E[|M_t - M_0|^2 | F_0] = sum_{s<t} E[theta_s' G_s theta_s | F_0]
    + E[|K_t - K_0|^2 | F_0], G_s the node Gram matrix of the driver increments.

    """
    M = decomposition.martingale
    K = decomposition.remainder
    space = M.space
    theta = decomposition.coefficients
    energy = np.einsum("said,saij,sajd->sa", theta, decomposition.gram, theta)
    cumulative = np.concatenate([np.zeros((1, space.n_atoms)), np.cumsum(energy, axis=0)])
    worst = 0.0
    scale = 1.0
    for t in range(space.n_steps + 1):
        lhs = block_average(space, np.sum((M.values[t] - M.values[0]) ** 2, axis=1), 0)
        rest = block_average(space, np.sum((K.values[t] - K.values[0]) ** 2, axis=1), 0)
        rhs = block_average(space, cumulative[t], 0) + rest
        scale = max(scale, float(np.max(lhs)))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst / scale


def representation_bound_check(
    decomposition: Decomposition, *, tolerance: float = 1e-10
) -> CheckReport:
    """(sum_{s<t} (|||Z_s||| + |||U_s|||) dt)^2 <= 2 t |||M_t - M_0|||_2^2 for every t."""
    M = decomposition.martingale
    space = M.space
    theta = decomposition.coefficients
    gram = decomposition.gram
    walk = (decomposition._driver_index("W") or [0])[0]
    others = [i for i in range(len(decomposition.drivers)) if i != walk]
    z_energy = np.einsum("sad,sa->sa", theta[:, :, walk, :] ** 2, gram[:, :, walk, walk])
    u_theta = theta[:, :, others, :]
    u_gram = gram[:, :, others][:, :, :, others]
    u_energy = np.einsum("said,saij,sajd->sa", u_theta, u_gram, u_theta)
    report = CheckReport(name="representation bound", tolerance=tolerance)
    z_norm = np.sqrt(np.stack([block_average(space, e, 0) for e in z_energy]) / space.dt)
    u_norm = np.sqrt(np.stack([block_average(space, e, 0) for e in u_energy]) / space.dt)
    for t in range(1, space.n_steps + 1):
        lhs = (np.sum(z_norm[:t] + u_norm[:t], axis=0) * space.dt) ** 2
        energy = block_average(space, np.sum((M.values[t] - M.values[0]) ** 2, axis=1), 0)
        rhs = 2.0 * (space.grid[t] - space.grid[0]) * energy
        scale = max(1.0, float(np.max(rhs)))
        report.check(max(0.0, float(np.max(lhs - rhs))) / scale, f"t index {t}")
    return report


def cond_orthogonality_check(
    V: L0Value, base: PartitionLike = 0, *, tolerance: float = 1e-12
) -> CheckReport:
    """V - E_0 V is conditionally orthogonal to E_0 V and no larger than V."""
    space = V.space
    mean = cond_expect(V, base)
    centered = V - mean
    inner = block_average(space, np.sum(centered.values * mean.values, axis=1), base)
    norm = CondNorm(space, 2.0, base)
    small = cond_norm(centered, norm).scalar
    large = cond_norm(V, norm).scalar
    scale = max(1.0, float(np.max(large)) ** 2)
    report = CheckReport(name="conditional orthogonality", tolerance=tolerance)
    report.check(float(np.max(np.abs(inner))) / scale, "inner product")
    report.check(
        max(0.0, float(np.max(small - large))) / max(1.0, float(np.max(large))),
        "contraction",
    )
    return report


def cond_fubini_check(
    space: FilteredSpace,
    f: np.ndarray | Callable[[int, int], float],
    mu: Sequence[float],
    base: PartitionLike = 0,
    *,
    tolerance: float = 1e-12,
) -> CheckReport:
    """E[sum_x f(., x) mu(x) | F_0] against sum_x E[f(., x) | F_0] mu(x).

    f is an array of shape (n_atoms, n_marks) or a function of (atom, mark).

    """
    weights = np.asarray(mu, dtype=float)
    if weights.ndim != 1 or np.any(weights < 0):
        raise ParameterError("The mark measure must be a non negative vector")
    if callable(f):
        table = np.array(
            [[f(a, x) for x in range(weights.size)] for a in range(space.n_atoms)],
            dtype=float,
        )
    else:
        table = np.asarray(f, dtype=float)
    if table.shape != (space.n_atoms, weights.size):
        raise DimensionError(
            f"Expected f of shape {(space.n_atoms, weights.size)}, got {table.shape}"
        )
    lhs = block_average(space, table @ weights, base)
    rhs = block_average(space, table, base) @ weights
    scale = max(1.0, float(np.max(np.abs(lhs))))
    report = CheckReport(name="conditional fubini", tolerance=tolerance)
    report.check(float(np.max(np.abs(lhs - rhs))) / scale)
    return report
