"""The hybrid l1 worked example: a 2x4 channel, three letters with budget 0.01
and one perfectly private letter.

``PUBLISHED`` holds the values reported for this instance. ``run_reference``
recomputes everything and compares against them.
"""

from __future__ import annotations

from dataclasses import dataclass


from .polytope import (
    ExtremePoint,
    Mode,
    design_lp,
    enumerate_extreme_points,
    make_assignment,
    recover_design,
    solve_assignment,
)
from .prob import MechanismDesign, ProblemInstance, make_instance

P_X_GIVEN_Y = ((0.3, 0.8, 0.5, 0.4),
               (0.7, 0.2, 0.5, 0.6))
P_Y = (0.5, 0.25, 0.125, 0.125)
EPSILONS = (0.01, 0.01, 0.01, 0.0)

# vertex (0-based, in enumeration order) chosen for each letter
PUBLISHED_ASSIGNMENT = (3, 1, 2, 0)

VERTEX_TOL = 1e-4
VALUE_TOL = 1e-3
# published decimals are not exact binary floats; a difference of exactly
# the tolerance must still count as a match
REPR_SLACK = 1e-12


@dataclass(frozen=True)
class Published:
    base_points: tuple[tuple[float, ...], ...] = (
        (0.675, 0.325, 0.0, 0.0),
        (0.1875, 0.0, 0.8125, 0.0),
        (0.0, 0.1563, 0.0, 0.8437),
        (0.0, 0.0, 0.6251, 0.3749),
    )
    # entropy constants of the assigned vertices, letters u1..u4, bits
    b_bits: tuple[float, ...] = (0.9544, 0.6962, 0.6254, 0.9097)
    p_u: tuple[float, ...] = (0.0, 0.1488, 0.143, 0.7082)
    utility_bits: float = 0.9109


PUBLISHED = Published()


def reference_instance() -> ProblemInstance:
    return make_instance(P_X_GIVEN_Y, P_Y, EPSILONS, "l1")


@dataclass(frozen=True)
class Check:
    name: str
    computed: float
    published: float
    tol: float

    @property
    def ok(self) -> bool:
        return abs(self.computed - self.published) <= self.tol + REPR_SLACK


@dataclass(frozen=True)
class ReferenceRun:
    points: tuple[ExtremePoint, ...]
    published_design: MechanismDesign
    best_design: MechanismDesign
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


def run_reference() -> ReferenceRun:
    inst = reference_instance()
    points = tuple(enumerate_extreme_points(inst, Mode.FULL_ROW_RANK))
    asg = make_assignment(points, PUBLISHED_ASSIGNMENT, inst, Mode.FULL_ROW_RANK)
    design = recover_design(solve_assignment(asg, inst), asg, inst)
    best = design_lp(inst, Mode.FULL_ROW_RANK)

    checks: list[Check] = []
    for v, (pt, pub) in enumerate(zip(points, PUBLISHED.base_points)):
        full = pt.full()
        for y in range(len(pub)):
            checks.append(Check(f"vertex {v + 1} [y{y + 1}]", float(full[y]), pub[y], VERTEX_TOL))
    if len(points) != len(PUBLISHED.base_points):
        checks.append(Check("vertex count", len(points), len(PUBLISHED.base_points), 0))
    for i, idx in enumerate(PUBLISHED_ASSIGNMENT):
        checks.append(Check(f"b(u{i + 1})", points[idx].entropy_bits, PUBLISHED.b_bits[i],
                            VALUE_TOL))
    for i, pub in enumerate(PUBLISHED.p_u):
        checks.append(Check(f"P_U(u{i + 1})", float(design.p_u.values[i]), pub, VALUE_TOL))
    checks.append(Check("I(U;Y) bits", design.exact_utility_bits, PUBLISHED.utility_bits,
                        VALUE_TOL))
    return ReferenceRun(points, design, best, tuple(checks))
