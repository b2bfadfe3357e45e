"""Exception types raised across the package."""


class BinspatialError(Exception):
    pass


class NotStereo(BinspatialError, ValueError):
    pass


class UnsupportedEncoding(BinspatialError, ValueError):
    pass


class MalformedContainer(BinspatialError, ValueError):
    pass


class IoFailure(BinspatialError, OSError):
    pass


class SignalTooShort(BinspatialError, ValueError):
    pass


class LagTooLarge(BinspatialError, ValueError):
    pass


class DelayTooLarge(BinspatialError, ValueError):
    pass


class LengthMismatch(BinspatialError, ValueError):
    pass


class ZeroReference(BinspatialError, ValueError):
    pass


class ZeroEstimate(BinspatialError, ValueError):
    pass


class ZeroChannel(BinspatialError, ValueError):
    pass


class EmptyList(BinspatialError, ValueError):
    pass


class DivergenceDetected(BinspatialError, RuntimeError):
    pass


class GradCheckFailed(BinspatialError, AssertionError):
    """Raised by :func:`binspatial.grad.grad_check`; ``report`` holds the numbers."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"gradient check failed for {report.loss_kind}: "
            f"max_rel_error={report.max_rel_error:.3e} > {report.threshold:.1e}"
        )
