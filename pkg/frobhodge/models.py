"""
Pydantic models for frobhodge

Defines the verdict/certificate models returned by the library checks, the
JSON file formats (modules, potentials, towers) and the versioned CLI report.
"""

from pydantic import BaseModel, ConfigDict, Field
from typing import List, Optional, Dict, Any, Tuple

REPORT_SCHEMA = "frobhodge.report/1"
MODULE_SCHEMA = "frobhodge.module/1"
POTENTIAL_SCHEMA = "frobhodge.potential/1"
TOWER_SCHEMA = "frobhodge.tower/1"


# ============================================================
# Verdicts
# ============================================================

class CheckResult(BaseModel):
    """One checked condition, with a witness when it fails."""
    name: str
    passed: bool
    witness: Optional[Any] = None
    detail: Optional[str] = None


class ValidationReport(BaseModel):
    """Axiom-by-axiom validation of a module or potential."""
    subject: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)


class Certificate(BaseModel):
    """Itemized certificate (polarized MHS, frame lemmas, PVHS)."""
    kind: str
    items: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.items)

    def item(self, name: str) -> CheckResult:
        return next(c for c in self.items if c.name == name)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.items if not c.passed]


class CommutatorWitness(BaseModel):
    """Failing entry: pair of divisor indices (j, l), input index a, output index d."""
    j: int
    l: int
    a: int
    d: int
    monomial: Any = None


class CommutatorVerdict(BaseModel):
    """Outcome of a WDVV / integrability / curvature check, valid up to `order`."""
    check: str
    holds: bool
    order: int
    violations: List[CommutatorWitness] = []

    @property
    def first(self) -> Optional[CommutatorWitness]:
        return self.violations[0] if self.violations else None


class MaxUnipotentVerdict(BaseModel):
    holds: bool
    checks: List[CheckResult]


class ConeVerdict(BaseModel):
    """Lambda-independence of W(sum lambda_j N_j) plus barycentric polarization."""
    consistent: bool
    samples: List[List[str]]
    dependent: List[List[str]] = []
    polarization: Certificate


class RoundTripResult(BaseModel):
    holds: bool
    order: int
    potential_match: bool
    gamma_match: bool
    mismatches: List[str] = []


# ============================================================
# Files
# ============================================================

class ModuleFile(BaseModel):
    """Graded Frobenius module with an adapted basis."""
    model_config = ConfigDict(extra='forbid')

    schema_version: str = MODULE_SCHEMA
    weight: int
    dims: List[int]
    degrees: Optional[List[int]] = None
    labels: Optional[List[str]] = None
    pairing: Dict[str, str]
    products: Dict[str, List[Tuple[int, str]]]
    framing: List[int]
    real: bool = True


class PotentialFile(BaseModel):
    """Quantum potential corrections; series map "m1,..,mr" to scalars."""
    model_config = ConfigDict(extra='forbid')

    schema_version: str = POTENTIAL_SCHEMA
    order: int = Field(ge=0)
    weight3: Optional[Dict[str, str]] = None
    phi_a: Dict[str, Dict[str, str]] = {}
    phi_ab: Dict[str, Dict[str, str]] = {}


class MatrixEntry(BaseModel):
    row: int
    col: int
    series: Dict[str, str]


class TowerFile(BaseModel):
    """Gamma tower: piece l holds the entries of Gamma_{-l}."""
    model_config = ConfigDict(extra='forbid')

    schema_version: str = TOWER_SCHEMA
    order: int = Field(ge=0)
    r: int = Field(ge=0)
    pieces: Dict[str, List[MatrixEntry]]


class Report(BaseModel):
    """Machine-readable CLI report."""
    schema_version: str = REPORT_SCHEMA
    command: str
    arguments: Dict[str, Any]
    status: str
    exit_code: int
    verdicts: Dict[str, Any] = {}
    witnesses: List[Any] = []
    payload: Dict[str, Any] = {}
