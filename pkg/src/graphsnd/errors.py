"""Exception hierarchy.

The CLI maps these onto its exit-code contract: ``ParseError`` -> 2,
``ContractError`` -> 3, ``GateFailure`` -> 4.
"""


class GraphSNDError(Exception):
    """Base class for all package errors."""


class ParseError(GraphSNDError, ValueError):
    """Malformed input file. Carries an optional 1-based line/column."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ContractError(GraphSNDError, ValueError):
    """Input parsed fine but violates a documented invariant."""


class EmptyGraphError(ContractError):
    """An estimator that needs at least one edge received none."""


class ConvergenceError(GraphSNDError, RuntimeError):
    """An iterative routine did not converge within its budget."""


class GateFailure(GraphSNDError):
    """An explicitly requested acceptance gate did not hold."""

    def __init__(self, message, cell=None):
        self.cell = cell
        super().__init__(message if cell is None else f"{message} (cell {cell})")
