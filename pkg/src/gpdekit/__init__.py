"""gpdekit: exact verification of homological vector fields on graded bundles."""

from gpdekit.algebra import (
    AlgebraError,
    GradedAlgebra,
    GradedExpression,
    GradedGenerator,
    GradingError,
    Substitution,
    grade_of,
    normalize,
    substitute,
)

__version__ = "0.1.0"
