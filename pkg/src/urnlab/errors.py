"""Exception hierarchy shared by all urnlab modules."""


class UrnError(ValueError):
    """Base class for every error raised by urnlab."""


class DimensionMismatch(UrnError):
    pass


class NegativeEntry(UrnError):
    def __init__(self, row, col, value=None):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"negative entry at ({row}, {col}): {value!r}")


class RowSumOutOfTolerance(UrnError):
    def __init__(self, row, total):
        self.row, self.sum = row, total
        super().__init__(f"row {row} sums to {total!r}, expected 1")


class ReducibleMatrix(UrnError):
    pass


class NoConvergence(UrnError):
    def __init__(self, iterations, residual=None):
        self.iterations, self.residual = iterations, residual
        super().__init__(
            f"power iteration did not converge after {iterations} iterations"
            f" (residual {residual!r})"
        )


class EmptyUrn(UrnError):
    def __init__(self, urn, total=None):
        self.urn, self.total = urn, total
        super().__init__(f"urn {urn} needs total initial mass >= 1, got {total!r}")


class ReducibleCombinedMatrix(UrnError):
    pass


class InvalidRouting(UrnError):
    pass


class SingleColor(UrnError):
    pass


class EmptyComposition(UrnError):
    pass


class UnsupportedFamily(UrnError):
    pass
