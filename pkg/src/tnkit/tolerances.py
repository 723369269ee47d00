"""Global numerical tolerances.

Every floating-point verdict in the package derives from the two constants
below.  EPS_EQ is an absolute equality tolerance; EPS_RANK is a relative
threshold for rank decisions (singular values, eigenvalue degeneracies).
The ratio between them is fixed; `set_tolerance` rescales both so a single
knob controls the whole hierarchy.
"""

EPS_EQ = 1e-10
EPS_RANK = 1e-8

_RATIO = EPS_RANK / EPS_EQ


def set_tolerance(eps_eq: float) -> None:
    """Rescale the tolerance pair, keeping EPS_RANK / EPS_EQ fixed."""
    global EPS_EQ, EPS_RANK
    if eps_eq <= 0:
        raise ValueError("tolerance must be positive")
    EPS_EQ = float(eps_eq)
    EPS_RANK = float(eps_eq) * _RATIO
