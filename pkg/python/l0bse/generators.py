# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Catalog of generators.

Every parameter is a scalar measurable w.r.t. partitions[0]: a number, one
number per base block or one number per atom constant on the base blocks.

"""

from typing import Any

import numpy as np
from atom.api import Atom, Enum, Float, Tuple, Typed

from .bsecore import (
    GENERATOR_KINDS,
    GeneratorSpec,
    LeftSumGenerator,
    base_parameter,
    register_kind,
)
from .errors import DimensionError, MeasurabilityError, ParameterError
from .l0algebra import relative_gap
from .probspace import FilteredSpace, L0Value, block_max, block_min, frozen_array
from .processes import (
    AdaptedProcess,
    MartingaleProcess,
    basis_drivers,
    doob_constant,
    mark_intensities,
    martingale_decompose,
    sp_norm,
)


def radial_clamp(values: np.ndarray, bound: np.ndarray) -> np.ndarray:
    """Project every row of values on the Euclidean ball of radius bound.

    The map is 1-Lipschitz, bounded by bound and vanishes at 0.

    """
    size = np.linalg.norm(values, axis=-1, keepdims=True)
    bound = np.broadcast_to(bound, size.shape)
    factor = np.ones_like(size)
    np.divide(bound, size, out=factor, where=size > bound)
    return values * factor


@register_kind
class ZeroGenerator(GeneratorSpec):
    """F = 0."""

    kind = "zero"

    def __init__(self, space: FilteredSpace) -> None:
        super().__init__(space=space)

    @property
    def y_independent(self) -> bool:
        return True

    def values(self, Y, M, prepared):
        return np.zeros((self.space.n_steps + 1, self.space.n_atoms, M.dim))


@register_kind
class IntegralGenerator(LeftSumGenerator):
    """f(t, Y, M) = h + a Y_t + b phi(Y_t - Y_0 + M_t) + c Y_0 + e |||M|||_p.

    phi is the identity or tanh, both 1-Lipschitz. The driver satisfies the
    Lipschitz condition of the integral solver with C1 = |a| + |b| and
    C2 = |a| + |c| + |e|.

    """

    kind = "integral"

    h = Typed(L0Value)
    a = Typed(L0Value)
    b = Typed(L0Value)
    c = Typed(L0Value)
    e = Typed(L0Value)

    #: 1-Lipschitz function applied to Y_t - Y_0 + M_t.
    phi = Enum("identity", "tanh")

    #: Exponent of the conditional norm of M entering the driver.
    p = Float(2.0)

    #: Declared Lipschitz constants, at least the derived ones.
    declared_c1 = Typed(L0Value)
    declared_c2 = Typed(L0Value)

    def __init__(
        self,
        space: FilteredSpace,
        *,
        h: Any = 0.0,
        a: Any = 0.0,
        b: Any = 0.0,
        c: Any = 0.0,
        e: Any = 0.0,
        phi: str = "identity",
        p: float = 2.0,
        c1: Any = None,
        c2: Any = None,
    ) -> None:
        doob_constant(p)
        super().__init__(
            space=space,
            h=base_parameter(space, h, "h"),
            a=base_parameter(space, a, "a"),
            b=base_parameter(space, b, "b"),
            c=base_parameter(space, c, "c"),
            e=base_parameter(space, e, "e"),
            phi=phi,
            p=float(p),
        )
        if c1 is not None:
            self.declared_c1 = self._declared(c1, "c1", self._derived_c1())
        if c2 is not None:
            self.declared_c2 = self._declared(c2, "c2", self._derived_c2())

    def _declared(self, value: Any, name: str, derived: L0Value) -> L0Value:
        declared = base_parameter(self.space, value, name, nonnegative=True)
        if np.any(declared.scalar < derived.scalar - 1e-12):
            raise ParameterError(
                f"Declared {name} is below the Lipschitz constant of the driver"
            )
        return declared

    def _derived_c1(self) -> L0Value:
        return L0Value(self.space, np.abs(self.a.scalar) + np.abs(self.b.scalar))

    def _derived_c2(self) -> L0Value:
        return L0Value(
            self.space,
            np.abs(self.a.scalar) + np.abs(self.c.scalar) + np.abs(self.e.scalar),
        )

    @property
    def c1(self) -> L0Value:
        return self.declared_c1 if self.declared_c1 is not None else self._derived_c1()

    @property
    def c2(self) -> L0Value:
        return self.declared_c2 if self.declared_c2 is not None else self._derived_c2()

    @property
    def y_independent(self) -> bool:
        return not (
            np.any(self.a.scalar) or np.any(self.b.scalar) or np.any(self.c.scalar)
        )

    def prepare(self, M):
        if not np.any(self.e.scalar):
            return np.zeros((self.space.n_atoms, 1))
        return sp_norm(M, self.p, 0).values

    def integrand(self, k, Y, M, prepared):
        current = Y.values[k]
        initial = Y.values[0]
        shifted = current - initial + M.values[k]
        if self.phi == "tanh":
            shifted = np.tanh(shifted)
        return (
            self.h.values
            + self.a.values * current
            + self.b.values * shifted
            + self.c.values * initial
            + self.e.values * prepared
        )


def _step_weights(space: FilteredSpace, weights: Any) -> np.ndarray:
    if weights is None:
        return frozen_array(np.ones((space.n_steps, space.n_atoms)))
    array = np.asarray(weights, dtype=float)
    if array.shape == (space.n_steps,):
        array = np.repeat(array[:, None], space.n_atoms, axis=1)
    if array.shape != (space.n_steps, space.n_atoms):
        raise DimensionError(
            f"Step weights must have shape {(space.n_steps, space.n_atoms)}, "
            f"got {array.shape}"
        )
    if np.any(array < 0) or not np.all(np.isfinite(array)):
        raise ParameterError("Step weights must be finite and non negative")
    if not np.array_equal(array, array[:, space.base.representatives]):
        raise MeasurabilityError("Step weights must be measurable w.r.t. partition 0")
    return frozen_array(array)


@register_kind
class PointwiseGenerator(LeftSumGenerator):
    """f(t, y, z, u) = w_t (h + a y + m z + sum_x nu_x u_x + kappa |z|).

    z and u are the coefficients of M on the random walk and on the
    compensated marks, w_t optional non negative step weights.

    """

    kind = "pointwise"

    h = Typed(L0Value)
    a = Typed(L0Value)
    m = Typed(L0Value)
    kappa = Typed(L0Value)

    #: One coefficient per mark.
    nu = Tuple(L0Value)

    #: Weight of every step, shape (N, n_atoms).
    step_weights = Typed(np.ndarray)

    #: Random walk and compensated marks of the space.
    drivers = Tuple(MartingaleProcess)

    def __init__(
        self,
        space: FilteredSpace,
        *,
        h: Any = 0.0,
        a: Any = 0.0,
        m: Any = 0.0,
        nu: Any = (),
        kappa: Any = 0.0,
        step_weights: Any = None,
    ) -> None:
        nu = list(nu) or [0.0] * space.marks
        if len(nu) != space.marks:
            raise ParameterError(
                f"Expected one nu coefficient per mark ({space.marks}), got {len(nu)}"
            )
        super().__init__(
            space=space,
            h=base_parameter(space, h, "h"),
            a=base_parameter(space, a, "a"),
            m=base_parameter(space, m, "m"),
            kappa=base_parameter(space, kappa, "kappa", nonnegative=True),
            nu=tuple(base_parameter(space, v, f"nu[{i}]") for i, v in enumerate(nu)),
            step_weights=_step_weights(space, step_weights),
            drivers=tuple(basis_drivers(space)),
        )

    @property
    def y_independent(self) -> bool:
        return not np.any(self.a.scalar)

    def prepare(self, M):
        decomposition = martingale_decompose(M, self.drivers)
        return decomposition.z, decomposition.u

    def driver(self, k: int, y: np.ndarray, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Driver on step k for per atom y, z of shape (n, d) and u of shape (n, m, d)."""
        value = (
            self.h.values
            + self.a.values * y
            + self.m.values * z
            + self.kappa.values * np.linalg.norm(z, axis=1, keepdims=True)
        )
        for x, coefficient in enumerate(self.nu):
            value = value + coefficient.values * u[:, x, :]
        return self.step_weights[k][:, None] * value

    def integrand(self, k, Y, M, prepared):
        z, u = prepared
        return self.driver(k, Y.values[k], z[k], u[k])

    def lipschitz(self) -> L0Value:
        """C = (|a| + |m| + kappa + (sum_x nu_x^2 / mu_x)^(1/2)) max_t w_t."""
        space = self.space
        constant = (
            np.abs(self.a.scalar) + np.abs(self.m.scalar) + self.kappa.scalar
        )
        if space.marks:
            intensity = mark_intensities(space).min(axis=0)
            jump = np.zeros(space.n_atoms)
            for x, coefficient in enumerate(self.nu):
                lowest = block_min(space, intensity[:, x], 0)
                jump += coefficient.scalar**2 / lowest
            constant = constant + np.sqrt(jump)
        weight = block_max(space, self.step_weights.max(axis=0), 0)
        return L0Value(space, constant * weight)

    def with_weights(self, step_weights: np.ndarray) -> "PointwiseGenerator":
        """Same driver with other step weights."""
        return PointwiseGenerator(
            self.space,
            h=self.h,
            a=self.a,
            m=self.m,
            nu=self.nu,
            kappa=self.kappa,
            step_weights=step_weights,
        )


@register_kind
class ZUGenerator(PointwiseGenerator):
    """Pointwise driver without y dependence, f(t, z, u)."""

    kind = "zu"

    def __init__(
        self,
        space: FilteredSpace,
        *,
        h: Any = 0.0,
        m: Any = 0.0,
        nu: Any = (),
        kappa: Any = 0.0,
        step_weights: Any = None,
    ) -> None:
        super().__init__(
            space, h=h, m=m, nu=nu, kappa=kappa, step_weights=step_weights
        )


class MaskedGenerator(LeftSumGenerator):
    """Pointwise driver active on some steps, frozen values on others.

    Used by the subinterval solver: the mask selects the active subinterval of
    every atom and the frozen contribution carries the driver evaluated at the
    already solved later subintervals.

    """

    kind = "masked"

    inner = Typed(PointwiseGenerator)

    #: 1 where the inner driver is active, shape (N, n_atoms).
    active = Typed(np.ndarray)

    #: Frozen driver values, shape (N, n_atoms, d).
    frozen = Typed(np.ndarray)

    def __init__(self, inner: PointwiseGenerator, active, frozen) -> None:
        space = inner.space
        active = frozen_array(active)
        frozen = frozen_array(frozen)
        for name, array in (("active", active), ("frozen", frozen)):
            if not np.array_equal(array, array[:, space.base.representatives]):
                raise MeasurabilityError(f"The {name} mask must be measurable w.r.t. partition 0")
        super().__init__(space=space, inner=inner, active=active, frozen=frozen)

    @property
    def y_independent(self) -> bool:
        return self.inner.y_independent

    def prepare(self, M):
        return self.inner.prepare(M)

    def integrand(self, k, Y, M, prepared):
        return self.active[k][:, None] * self.inner.integrand(k, Y, M, prepared) + self.frozen[k]


class RandomMeasure(Atom):
    """Finite measure on the grid times whose masses are measurable w.r.t. partition 0."""

    space = Typed(FilteredSpace)

    #: Mass of every grid time, shape (N + 1, n_atoms).
    weights = Typed(np.ndarray)

    def __init__(self, space: FilteredSpace, weights) -> None:
        array = np.array(weights, dtype=float)
        if array.ndim == 1:
            array = np.repeat(array[:, None], space.n_atoms, axis=1)
        if array.shape != (space.n_steps + 1, space.n_atoms):
            raise DimensionError(
                f"Expected masses of shape {(space.n_steps + 1, space.n_atoms)}, "
                f"got {array.shape}"
            )
        if np.any(array < 0) or not np.all(np.isfinite(array)):
            raise ParameterError("Masses of a random measure must be finite and non negative")
        if not np.array_equal(array, array[:, space.base.representatives]):
            raise MeasurabilityError("Masses must be measurable w.r.t. partition 0")
        super().__init__(space=space, weights=frozen_array(array))

    @classmethod
    def from_blocks(cls, space: FilteredSpace, table) -> "RandomMeasure":
        """One row of N + 1 masses per base block."""
        array = np.asarray(table, dtype=float)
        if array.shape != (space.base.n_blocks, space.n_steps + 1):
            raise DimensionError(
                f"Expected {(space.base.n_blocks, space.n_steps + 1)} block masses, "
                f"got {array.shape}"
            )
        return cls(space, array.T[:, space.base.labels])

    @classmethod
    def point_mass(
        cls, space: FilteredSpace, index: int = 0, mass: float = 1.0
    ) -> "RandomMeasure":
        masses = np.zeros(space.n_steps + 1)
        masses[index] = mass
        return cls(space, masses)

    @classmethod
    def uniform(cls, space: FilteredSpace, total: float = 1.0) -> "RandomMeasure":
        return cls(space, np.full(space.n_steps + 1, total / (space.n_steps + 1)))

    def total(self) -> L0Value:
        """v([t_0, t_N])."""
        return L0Value(self.space, self.weights.sum(axis=0))

    def tail_weights(self) -> np.ndarray:
        """v([t_0, t_{N-1-m}]) for every step m, shape (N, n_atoms)."""
        cumulative = np.cumsum(self.weights, axis=0)
        return cumulative[self.space.n_steps - 1 :: -1]


@register_kind
class DelayedGenerator(GeneratorSpec):
    """F_{t_k} = sum_{i<k} sum_{j<=i} g(t_{i-j}, Z_{i-j}, U_{i-j}) v_j dt.

    g is a driver without y dependence and v a random measure on the grid.

    """

    kind = "delayed"

    g = Typed(PointwiseGenerator)

    measure = Typed(RandomMeasure)

    def __init__(
        self,
        space: FilteredSpace,
        g: PointwiseGenerator | None = None,
        measure: RandomMeasure | None = None,
        *,
        v: Any = None,
        **g_parameters: Any,
    ) -> None:
        if g is None:
            g = ZUGenerator(space, **g_parameters)
        elif g_parameters:
            raise ParameterError("Pass either a driver or its parameters, not both")
        if g.space is not space:
            raise DimensionError("The delayed driver lives on another space")
        if not g.y_independent:
            raise ParameterError("The delayed driver must not depend on y")
        if measure is None:
            measure = _coerce_measure(space, v)
        super().__init__(space=space, g=g, measure=measure)

    @property
    def y_independent(self) -> bool:
        return True

    def prepare(self, M):
        return self.g.prepare(M)

    def values(self, Y, M, prepared):
        space = self.space
        steps = np.stack(
            [self.g.integrand(k, Y, M, prepared) for k in range(space.n_steps)]
        )
        masses = self.measure.weights
        out = np.zeros((space.n_steps + 1, space.n_atoms, M.dim))
        for i in range(space.n_steps):
            delayed = np.zeros_like(steps[0])
            for j in range(i + 1):
                delayed += masses[j][:, None] * steps[i - j]
            out[i + 1] = out[i] + delayed * space.dt
        return out

    def undelayed(self) -> PointwiseGenerator:
        """h(t_m, z, u) = v([t_0, t_{N-1-m}]) g(t_m, z, u), same F_T as the delayed one."""
        return self.g.with_weights(self.g.step_weights * self.measure.tail_weights())

    def lipschitz(self) -> L0Value:
        """C = v([t_0, t_N]) C_g."""
        return self.measure.total() * self.g.lipschitz()

    def swap_gap(self, M: MartingaleProcess, undelayed: PointwiseGenerator | None = None) -> float:
        """Gap between the delayed double sum and the undelayed single sum at T."""
        undelayed = undelayed or self.undelayed()
        zeros = AdaptedProcess.zeros(self.space, M.dim)
        prepared = self.prepare(M)
        direct = self.values(zeros, M, prepared)[-1]
        swapped = undelayed.values(zeros, M, prepared)[-1]
        return relative_gap(L0Value(self.space, direct), L0Value(self.space, swapped))


def _coerce_measure(space: FilteredSpace, v: Any) -> RandomMeasure:
    if v is None:
        return RandomMeasure.point_mass(space)
    if isinstance(v, RandomMeasure):
        return v
    array = np.asarray(v, dtype=float)
    if array.ndim == 2 and array.shape == (space.base.n_blocks, space.n_steps + 1):
        return RandomMeasure.from_blocks(space, array)
    return RandomMeasure(space, array)


def _elapsed(space: FilteredSpace) -> np.ndarray:
    return (space.grid - space.grid[0])[:, None, None]


@register_kind
class PathFunctionalGenerator(GeneratorSpec):
    """F_t = a t Y_0.

    With a T = 1 and E_0(xi) = 0 every xi + Y_0 is a fixed point of G.

    """

    kind = "path-functional"

    a = Typed(L0Value)

    def __init__(self, space: FilteredSpace, *, a: Any = 0.0) -> None:
        super().__init__(space=space, a=base_parameter(space, a, "a"))

    def values(self, Y, M, prepared):
        return _elapsed(self.space) * self.a.values[None] * Y.values[0][None]


@register_kind
class BoundedLipschitzGenerator(GeneratorSpec):
    """F_t = clamp_B((t / T)(Y_0 - M_t)) / (2 C_p).

    G(V) = xi + clamp_B(V) / (2 C_p) is then nonexpansive and maps the
    conditional ball of radius |||xi|||_p + B / (2 C_p) into itself.

    """

    kind = "bounded-lipschitz"

    #: Radius of the clamp.
    bound = Typed(L0Value)

    p = Float(2.0)

    def __init__(self, space: FilteredSpace, *, bound: Any = 1.0, p: float = 2.0) -> None:
        doob_constant(p)
        parameter = base_parameter(space, bound, "bound", nonnegative=True)
        super().__init__(space=space, bound=parameter, p=float(p))

    @property
    def scale(self) -> float:
        return 1.0 / (2.0 * doob_constant(self.p))

    def values(self, Y, M, prepared):
        space = self.space
        shifted = (_elapsed(space) / space.horizon) * (Y.values[0][None] - M.values)
        return self.scale * radial_clamp(shifted, self.bound.values[None])


@register_kind
class BoundedIntegralGenerator(LeftSumGenerator):
    """f(s, Y, M) = clamp_B(Y_0 - M_s) / (2 T C_p)."""

    kind = "bounded-integral"

    bound = Typed(L0Value)

    p = Float(2.0)

    def __init__(self, space: FilteredSpace, *, bound: Any = 1.0, p: float = 2.0) -> None:
        doob_constant(p)
        parameter = base_parameter(space, bound, "bound", nonnegative=True)
        super().__init__(space=space, bound=parameter, p=float(p))

    @property
    def scale(self) -> float:
        return 1.0 / (2.0 * self.space.horizon * doob_constant(self.p))

    def integrand(self, k, Y, M, prepared):
        return self.scale * radial_clamp(Y.values[0] - M.values[k], self.bound.values)


def make_generator(kind: str, space: FilteredSpace, **parameters: Any) -> GeneratorSpec:
    """Build a catalog generator from its kind and parameters.

    Raises
    ------
    ParameterError
        If the kind is unknown or a parameter is not accepted by the kind.

    """
    try:
        cls = GENERATOR_KINDS[kind]
    except KeyError:
        raise ParameterError(
            f"Unknown generator kind {kind!r}, expected one of {sorted(GENERATOR_KINDS)}"
        ) from None
    try:
        return cls(space, **parameters)
    except TypeError as e:
        raise ParameterError(f"Invalid parameters for generator {kind!r}: {e}") from e
