"""A workbench for the higher-order psi-calculus."""

from .nominal import Name, fresh, support, swap, subst
from .syntax import canonicalize, struct_eq, render
from .instance import IllTyped, Instance, TypeEnv, EMPTY_ENV

__all__ = [
    "Name",
    "fresh",
    "support",
    "swap",
    "subst",
    "canonicalize",
    "struct_eq",
    "render",
    "IllTyped",
    "Instance",
    "TypeEnv",
    "EMPTY_ENV",
]
