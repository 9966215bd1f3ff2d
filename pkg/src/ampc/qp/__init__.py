from .condense import AffineMap, as_affine, condense
from .problem import QpProblem, QpSolution, QpStatus, dump_qp, load_qp
from .solver import kkt_residuals, solve_qp

__all__ = ["AffineMap", "as_affine", "condense", "QpProblem", "QpSolution", "QpStatus",
           "dump_qp", "load_qp", "kkt_residuals", "solve_qp"]
