"""Exception types raised across the package."""


class GraphGenerationError(RuntimeError):
    """No connected sample was found within the retry budget."""

    def __init__(self, n_nodes, p, seed, retries):
        self.n_nodes = n_nodes
        self.p = p
        self.seed = seed
        self.retries = retries
        super().__init__(
            f"no connected Erdos-Renyi graph for (n={n_nodes}, p={p}, seed={seed}) "
            f"after {retries} attempts"
        )


class SpectralNormError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, estimate, iterations):
        self.estimate = estimate
        self.iterations = iterations
        super().__init__(
            f"power iteration did not converge in {iterations} iterations "
            f"(last estimate {estimate!r})"
        )


class ConvergenceError(RuntimeError):
    """An iterative reference solver ran out of iterations."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class DivergenceError(FloatingPointError):
    """An agent produced a non-finite iterate."""

    def __init__(self, agent, round_index):
        self.agent = agent
        self.round_index = round_index
        super().__init__(f"non-finite iterate at agent {agent}, round {round_index}")


class ProtocolViolation(RuntimeError):
    """The bulk-synchronous message protocol was broken."""
