"""Numerical verification of curvature identities for square Finsler metrics."""

from . import betaform, classify, errors, finslercurv, harness, numkit, riemann
from .classify import FamilyParams, constant_curvature_family, deform, model_family, structure_residuals
from .finslercurv import SquareMetricModel, curvature_bundle
from .harness import RunConfig, emit_report, parse_report, run_verify
from .riemann import MetricField, euclidean, space_form

__version__ = "0.1.0"
