"""Operator systems and the modules that register their cone oracles.

Importing the package loads every module so that cone_member and verify can
dispatch on every system kind and certificate kind.
"""

from opsystk.systems import dualize, matricial, opsys, quotient, tensor

__all__ = ["dualize", "matricial", "opsys", "quotient", "tensor"]
