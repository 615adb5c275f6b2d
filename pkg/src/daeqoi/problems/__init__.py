"""Built-in benchmark problems with analytic Jacobians and consistent ICs."""

import inspect

from .. import exceptions
from . import ennpe, pendulum, petzold, robertson
from .ennpe import EnnpeAssembly, ennpe_analytic, ennpe_assemble, ennpe_initial_conditions

_BUILDERS = {
    "robertson": robertson.build,
    "pendulum1": pendulum.build_index1,
    "pendulum2": pendulum.build_index2,
    "petzold2": petzold.build,
    "ennpe": ennpe.build,
}


def problem_names():
    return sorted(_BUILDERS)


def build_problem(name, **params):
    """Construct a built-in problem by name.

    Raises
    ------
    UnknownProblemError
        For unregistered names.
    InvalidParamsError
        For parameters the builder rejects.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise exceptions.UnknownProblemError(
            f"{name!r}; known problems: {', '.join(problem_names())}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise exceptions.InvalidParamsError(f"{name}: {exc}") from exc


def describe(name):
    """One-paragraph description of a built-in problem."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise exceptions.UnknownProblemError(name) from None
    return inspect.getdoc(builder) or ""
