"""Exception hierarchy shared by all modules."""


class SquidJPAError(Exception):
    """Base class for every error raised by this package."""


class BetaHysteretic(SquidJPAError, ValueError):
    """Shunting ratio beta >= 1 admits several DC branches."""

    def __init__(self, beta):
        super().__init__(f"beta = {beta:.6g} >= 1: DC flux relation is hysteretic")
        self.beta = beta


class NegativeStiffness(SquidJPAError, ValueError):
    """Linearized array inductance is not positive at the requested bias."""


class IncommensurateDrive(SquidJPAError, ValueError):
    """A tone frequency is not an integer multiple of the base frequency."""


class NoConvergence(SquidJPAError, RuntimeError):
    """Periodic steady state not reached within the allowed number of periods.

    The partially converged solution is attached as ``solution``.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class DivergedTrajectory(SquidJPAError, RuntimeError):
    """The integrated trajectory overflowed or produced NaN."""

    def __init__(self, message, pump_power_dbm=None):
        super().__init__(message)
        self.pump_power_dbm = pump_power_dbm


class MaxGainBelowTarget(SquidJPAError, RuntimeError):
    """The pump sweep never reached the requested gain."""

    def __init__(self, max_gain_db, target_gain_db, pump_power_dbm=None):
        super().__init__(
            f"maximum gain {max_gain_db:.3f} dB below target {target_gain_db:.3f} dB"
        )
        self.max_gain_db = max_gain_db
        self.target_gain_db = target_gain_db
        self.pump_power_dbm = pump_power_dbm


class NoCompressionInRange(SquidJPAError, RuntimeError):
    def __init__(self, highest_power_dbm):
        super().__init__(
            f"gain did not compress by 1 dB up to {highest_power_dbm:.2f} dBm"
        )
        self.highest_power_dbm = highest_power_dbm


class NearPole(SquidJPAError, ValueError):
    """Pump frequency sits inside the guard band of a series-resonance pole."""

    def __init__(self, omega):
        super().__init__(f"omega = {omega:.6e} rad/s is within the pole guard band")
        self.omega = omega


class FitDiverged(SquidJPAError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonUniformGrid(SquidJPAError, ValueError):
    pass


class BadFit(SquidJPAError, ValueError):
    def __init__(self, exponent):
        super().__init__(f"power-law exponent {exponent:.4f} outside [1.8, 2.2]")
        self.exponent = exponent


class ConfigError(SquidJPAError, ValueError):
    """Invalid run configuration; ``path`` is a JSON-pointer to the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
