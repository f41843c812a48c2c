"""Desk-scale solvers and certificates for convex programs with countably
many constraints: exact convex calculus, closed-form infinite sums, three
Lagrangian duals with a solution transfer map, and fuzzy stationarity
certificates."""

from .extreal import ExtReal, MinusInfinityError, INF
from .functions import (
    Affine,
    BoxIndicator,
    ConvexFn,
    ConvexQuadratic,
    MaxAffine,
    PositivePart,
    Scale,
    Shift,
    Subdifferential,
    Sum,
)
from .infsum import (
    ConstantTail,
    ConstraintFamily,
    RationalAffineTail,
    tail_limit_value,
    upper_sum,
)
from .minnorm import min_norm_point
from .primal import (
    Instance,
    ValueReport,
    minimize_lagrangian,
    slater_check,
    solve_primal,
    value_function_scan,
)
from .duals import (
    Multiplier,
    assemble_lagrangian,
    dual_value,
    duality_chain_report,
    minimax_check,
    solve_dual,
    transfer_multiplier,
)
from .verify import (
    complementary_slackness,
    fuzzy_kkt_d,
    fuzzy_kkt_dm,
    lagrangian_attainment,
    recheck_certificate,
)
from .instances import builtin, builtin_names, parse, random_instance, serialize

__version__ = "0.1.0"
