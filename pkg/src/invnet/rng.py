"""Seeded random stream with a fixed draw vocabulary.

The simulator consumes randomness only through the methods below, in the
order initiator -> contact permutation -> acceptance draws -> project return
-> idle-agent returns. Keeping that vocabulary small lets tests substitute a
scripted stream.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

# smallest value substituted for an exact 0.0 so acceptance draws lie in (0, 1)
_TINY = 2.0**-54


class RandomStream:
    """PCG64-backed stream. Same seed, same build -> same draws."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._saved_state: dict | None = None
        self._last_block = 0

    def initiator(self, n_initiators: int) -> int:
        return int(self._gen.integers(n_initiators))

    def permutation(self, n: int) -> NDArray[np.intp]:
        return self._gen.permutation(n)

    def acceptance_draws(self, n: int) -> NDArray[np.float64]:
        """Draw a block of n uniforms on the open interval (0, 1).

        A caller that uses only the first m draws must call ``release(n - m)``
        so the stream advances by exactly m.
        """
        self._saved_state = self._gen.bit_generator.state
        self._last_block = n
        u = self._gen.random(n)
        u[u == 0.0] = _TINY
        return u

    def release(self, unused: int) -> None:
        """Give back the trailing ``unused`` draws of the last acceptance block."""
        if unused <= 0:
            return
        if self._saved_state is None or unused > self._last_block:
            raise RuntimeError("release() without a matching acceptance_draws() block")
        self._gen.bit_generator.state = self._saved_state
        used = self._last_block - unused
        if used:
            self._gen.random(used)
        self._saved_state = None

    def project_return(self) -> float:
        return float(self._gen.uniform(-1.0, 1.0))

    def idle_returns(self, n: int) -> NDArray[np.float64]:
        return self._gen.uniform(-1.0, 1.0, n)

    @property
    def state(self) -> dict:
        return self._gen.bit_generator.state


class ScriptedStream:
    """Replays fixed draws; used to hand-trace the project lifecycle."""

    def __init__(self, initiators=(), permutations=(), uniforms=(), returns=(), idle=()) -> None:
        self.initiators = list(initiators)
        self.permutations = [np.asarray(p, dtype=np.intp) for p in permutations]
        self.uniforms = [float(u) for u in uniforms]
        self.returns = [float(r) for r in returns]
        self.idle = [np.asarray(r, dtype=np.float64) for r in idle]
        self._upos = 0
        self._last_block = 0

    def initiator(self, n_initiators: int) -> int:
        return self.initiators.pop(0)

    def permutation(self, n: int) -> NDArray[np.intp]:
        if self.permutations:
            return self.permutations.pop(0)
        return np.arange(n)

    def acceptance_draws(self, n: int) -> NDArray[np.float64]:
        block = self.uniforms[self._upos : self._upos + n]
        if len(block) < n:
            raise RuntimeError(f"scripted stream ran out of acceptance draws at {self._upos}")
        self._upos += n
        self._last_block = n
        return np.array(block)

    def release(self, unused: int) -> None:
        self._upos -= max(unused, 0)

    @property
    def acceptance_consumed(self) -> int:
        return self._upos

    def project_return(self) -> float:
        return self.returns.pop(0)

    def idle_returns(self, n: int) -> NDArray[np.float64]:
        if self.idle:
            r = self.idle.pop(0)
            if r.size != n:
                raise RuntimeError(f"scripted idle block has {r.size} returns, step needs {n}")
            return r
        return np.zeros(n)
