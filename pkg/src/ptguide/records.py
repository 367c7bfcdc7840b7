"""Result records shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field


def sort_key(z):
    z = complex(z.value if hasattr(z, "value") else z)
    return (round(z.real, 12), round(z.imag, 12))


@dataclass
class EigenvalueRecord:
    """One computed eigenvalue.

    ``residual`` is solver specific (smallest relative singular value of the
    matching matrix, or the eigenpair residual for collocation);
    ``convergence`` is the distance to the partner found at a finer
    resolution, when one was computed.
    """

    value: complex
    solver: str
    resolution: tuple
    residual: float = float("nan")
    conjugate_pair: bool = False
    convergence: float = float("nan")
    converged: bool = False
    multiplicity: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def real(self):
        return self.value.real

    @property
    def imag(self):
        return self.value.imag

    def as_row(self):
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "solver": self.solver,
            "resolution": "x".join(str(r) for r in self.resolution),
            "residual": self.residual,
            "convergence": self.convergence,
        }


def mark_conjugate_pairs(records, tol=1e-8):
    """Set ``conjugate_pair`` on records whose conjugate is also present."""
    for r in records:
        z = r.value
        r.conjugate_pair = abs(z.imag) > tol and any(
            o is not r and abs(o.value - z.conjugate()) < tol * max(1.0, abs(z)) for o in records
        )
    return records
