"""Variational regularisation of linear inverse problems.

Tikhonov, Lasso and total-variation regularisation, solved by direct
formulas, forward-backward splitting and primal-dual proximal splitting,
with parameter schedules that couple the corruption level to the
regularisation weight and the iteration budget, and with numerical
diagnostics for source conditions, growth inequalities and error bounds.

Modules
-------
linop        linear operators (dense, blur, gradient, stacking, centring)
prox         convex functionals with values, gradients and proximal maps
solvers      splitting methods, gap machinery and direct ridge solvers
schedules    corruption-to-parameter rules
diagnostics  certificates, inequality samplers and bound verifiers
experiments  noise models, phantoms and end-to-end sweeps
cli          command line front end
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
