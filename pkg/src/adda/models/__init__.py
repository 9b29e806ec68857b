"""DA kernels: Polya-Gamma logistic regression, Bayesian lasso, linear mixed effects."""

from .lasso import LassoData, LassoHyper, LassoKernel, LassoTheta
from .logistic import LogisticData, LogisticKernel, LogisticPrior
from .lme import LmeData, LmeKernel, LmePrior, LmeTheta, check_assumption1

__all__ = [
    "LassoData", "LassoHyper", "LassoKernel", "LassoTheta",
    "LogisticData", "LogisticKernel", "LogisticPrior",
    "LmeData", "LmeKernel", "LmePrior", "LmeTheta", "check_assumption1",
]
