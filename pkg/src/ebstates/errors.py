"""Exception hierarchy shared by all modules."""


class EBStatesError(Exception):
    """Base class for numerical failures raised by this package."""


class SingularMatrixError(EBStatesError):
    """A linear system is singular (or numerically so) and no regularization was requested."""


class EigenConvergenceError(EBStatesError):
    """The eigenvalue iteration did not converge."""


class DefectivePointError(EBStatesError):
    """Evaluation was requested at a point where the Bloch Hamiltonian is defective."""


class AmbiguousBandError(EBStatesError):
    """The occupied band cannot be selected because an energy sits on the cut."""


class ResonanceError(SingularMatrixError):
    """The circuit Laplacian has a (numerical) zero mode at the requested frequency."""


class NearResonanceWarning(RuntimeWarning):
    """Inversion at a frequency close to a resonance amplifies measurement noise."""
