"""Control-envelope synthesis for hybrid systems.

Given a problem sketch (assumptions, guarded control actions with the guards
left blank, a plant ODE with a cycle time bound, and a safety condition),
the engine fills in a controllable invariant and per-action guards by
symbolically executing loop-free hybrid games, then independently checks the
result's safety obligations.
"""

from .syntax import (  # noqa: F401
    Add, And, Assign, AssignAny, BoolConst, Box, Choice, Cmp, Const, Diamond,
    Div, Dual, Equiv, Exists, FALSE, Forall, Formula, HybridGame, Imply,
    Loop, Mul, Neg, Not, ODE, Or, Pow, Seq, Sub, TRUE, TagCollision, Term,
    Test, Variable, bound_vars, free_vars, num, substitute, tag_rename,
)
from .parser import (  # noqa: F401
    ProblemSketch, SyntaxError_, TemplateViolation, parse_formula,
    parse_problem, parse_term, print_formula, print_game, print_problem,
    print_term,
)
from .arith import (  # noqa: F401
    DivisionByZeroLiteral, SizeBlowup, dnf, nnf, normalize_term, simplify,
)
from .qe import (  # noqa: F401
    BackendTimeout, Context, DegreeTooHigh, QEResult, SmtBackend,
    check_equivalence, eliminate, is_valid,
)
from .ode import (  # noqa: F401
    ClosedFormSolution, HintNotInvariant, NotSolvable, OdeSystem,
    hint_strengthen, odereduce, solve,
)
from .reduce import LoopInInput, ReduceResult, reduce  # noqa: F401
from .synthesis import (  # noqa: F401
    NoSolution, Solution, compute_I0, optimality_test, permanent_actions,
    run, synthesize_guards, unroll_step, uniform_action_optimality,
)
from .checker import check_solution, simulate_check  # noqa: F401
