"""Exception family shared by all causalfield modules."""


class CausalFieldError(Exception):
    """Base class for all toolkit errors."""


class NonSymmetricTensor(CausalFieldError):
    """Tensor storage lost its symmetry (should be impossible with
    upper-triangle storage; raised only from consistency asserts)."""


class SingularPrincipalSymbol(CausalFieldError):
    """The perturbed principal symbol is not invertible (or not
    hyperbolic) at some lattice point."""


class WindowOverflow(CausalFieldError):
    """A causal cone left the lattice window; enlarge the margins."""


class MarginViolation(CausalFieldError):
    """A field's support reaches into the stencil margin of the window."""


class CFLViolation(CausalFieldError):
    """Time step too large for the declared maximal signal speed."""


class NoCutoffRoom(CausalFieldError):
    """No room in the window to place a smooth cutoff between a past
    cone and its complement."""


class NotCausallyOrdered(CausalFieldError):
    """A certified causal-order precondition is absent; the requested
    check would be vacuous."""


class BogoliubovViolation(CausalFieldError):
    """Extracted mode-space map fails the symplectic block conditions
    beyond tolerance (grid too coarse or map corrupted)."""


class CutoffUnstable(CausalFieldError):
    """Fock-space quantity did not stabilize between truncation levels."""


class InadmissibleSum(CausalFieldError):
    """A sum of coefficient functionals leaves the admissible class."""


class DomainViolation(CausalFieldError):
    """A phase oracle was evaluated outside its declared domain."""

    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class NotExtendable(CausalFieldError):
    """Two admissible splittings gave different extended phases; the
    input oracle violates the required exchange symmetry."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class PersistenceFailure(CausalFieldError):
    """A previously trivialized region pair re-acquired a phase."""


class ConfigError(CausalFieldError):
    """Campaign or session configuration is malformed."""


class ScenarioError(CausalFieldError):
    """A single scenario failed to execute (isolated per scenario)."""


class MissingSeries(CausalFieldError):
    """A plot was requested for a series the report does not contain."""
