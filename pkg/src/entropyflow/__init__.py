"""Entropy, Fisher information and their higher analogues along the heat flow."""

from .density import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .heatflow import T_MIN, Flow, FlowCurve, FlowState, convolve, evolve, flow_curve, log_convolve

__version__ = "0.1.0"
