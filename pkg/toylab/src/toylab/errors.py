class ToyLabError(Exception):
    """Base error for the toy pruning lab."""


class PruneError(ToyLabError):
    """A pruning criterion could not be computed or applied."""


class DivergenceError(ToyLabError):
    """Training loss exploded; the partial curve was kept and flagged."""
