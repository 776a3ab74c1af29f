"""Exception types raised across the laboratory."""


class DunklabError(Exception):
    """Base class for all laboratory errors."""


class NotLatticePreserving(DunklabError):
    """A generator does not map the lattice into itself."""


class NotFinite(DunklabError):
    """Group closure exceeded the configured element bound."""


class NonCyclicStabilizer(DunklabError):
    """Generic-point stabilizer of a hypertorus is not cyclic (internal bug)."""


class DegenerateTransverseLattice(DunklabError):
    """Image of the lattice under a normal covector does not have rank 2."""


class TrivialBundleParameter(DunklabError):
    """Kronecker function requested at a lattice parameter; section does not exist."""


class PoleEvaluation(DunklabError):
    """Evaluation point is on (or numerically on) the pole divisor."""


class StabilizedBundle(DunklabError):
    """Some nontrivial group element fixes the bundle; Dunkl construction fails."""


class NotDescendable(DunklabError):
    """Tangential multipliers do not vanish; descent to the transverse curve fails."""


class TrivialOnTransverseCurve(DunklabError):
    """Descended bundle is trivial on the transverse curve; no residue-one section."""


class OrderOverflow(DunklabError):
    """Operator composition would exceed differential order 2."""


class SamplePointTooClose(DunklabError):
    """Sample point violates the transverse clearance to a hypertorus."""


class BasepointOnHypertorus(DunklabError):
    """Requested basepoint lies too close to a reflection hypertorus."""


class StepUnderflow(DunklabError):
    """Adaptive integrator step fell below the minimum; path is too close to a pole."""


class ToleranceNotMet(DunklabError):
    """Adaptive integrator could not reach the requested tolerance."""


class ConfigError(DunklabError):
    """Laboratory configuration failed to parse or validate."""
