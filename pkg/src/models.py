# models.py

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from src.hilbert import (
    DOWN,
    IDENTITY_2,
    MINUS_X,
    NUMBER,
    PLUS_X,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    UP,
    LatticeSpec,
    OperatorMatrix,
    embed_local,
    embed_product,
    joint_eigenspaces,
    operator_sum,
    product_state,
)
from src.settings import (
    COMMUTATOR_TOL,
    DEFAULT_ETAS,
    DEFAULT_H_VIOLATION,
    DEFAULT_J,
    DEFAULT_MU,
    GENERATOR_EIGENVALUE_TOL,
)

logger = logging.getLogger(__name__)

ModelKind = Literal["u1", "z2"]
JumpSelection = Literal["matter", "gauge", "both"]
SequenceKind = Literal["compliant_L4", "staggered", "stark_staggered", "stark_linear", "z2_geometric", "custom"]
GeneratorSource = Literal["full", "pseudo"]

U1_PRESETS = ("u1_vacuum", "u1_charge_proliferated", "u1_domainwall_x", "u1_domainwall_z")
Z2_PRESETS = ("z2_cdw", "z2_domainwall_x", "z2_domainwall_z")

COMPLIANT_L4 = (Fraction(-115, 122), Fraction(116, 122), Fraction(-118, 122), Fraction(122, 122))

# Spin-1/2 link operators, s = σ/2 and s⁺ = σ⁺.
S_X = SIGMA_X / 2
S_Z = SIGMA_Z / 2
S_PLUS = SIGMA_PLUS

# (−1)^n for hardcore bosons with n = 1 on |↑⟩.
PARITY = -SIGMA_Z

LOCAL_STATES = {"1": UP, "0": DOWN, "+": PLUS_X, "-": MINUS_X}


class ModelError(ValueError):
    """Raised for invalid model, preset or protection-sequence combinations."""


class U1Params(BaseModel):
    """Spin-1/2 U(1) quantum link model."""

    model_config = {"frozen": True}

    J: float = Field(default=DEFAULT_J, gt=0)
    mu: float = DEFAULT_MU
    L: int = Field(default=4, ge=2)
    boundary: Literal["periodic", "open"] = "periodic"

    @model_validator(mode="after")
    def check_staggering(self):
        if self.boundary == "periodic" and self.L % 2:
            raise ValueError(f"U(1) staggering needs an even number of sites on a ring, got L={self.L}")
        return self


class Z2Params(BaseModel):
    """Z₂ lattice gauge theory with hardcore-boson matter."""

    model_config = {"frozen": True}

    J: float = Field(default=DEFAULT_J, gt=0)
    h: float = DEFAULT_H_VIOLATION
    L: int = Field(default=4, ge=2)
    boundary: Literal["periodic", "open"] = "periodic"
    etas: Tuple[float, float, float, float] = DEFAULT_ETAS


class ProtectionSequence(BaseModel):
    """Site coefficients c_j (j = 1..L) of the linear protection term."""

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    kind: SequenceKind
    coefficients: Tuple[Fraction, ...]

    @field_validator("coefficients", mode="before")
    @classmethod
    def to_fractions(cls, values):
        try:
            return tuple(Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10**9) for v in values)
        except (TypeError, ValueError) as e:
            raise ValueError(f"coefficients must be rational numbers: {e}") from e

    @property
    def length(self) -> int:
        return len(self.coefficients)

    def as_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coefficients])


def make_sequence(kind: SequenceKind, L: int, custom: Optional[Sequence] = None) -> ProtectionSequence:
    """Build one of the named sequences for a chain of L sites."""
    sites = range(1, L + 1)
    if kind == "compliant_L4":
        if L != 4:
            raise ModelError(f"compliant_L4 is defined for L=4 only, got L={L}")
        coefficients = COMPLIANT_L4
    elif kind == "staggered":
        coefficients = [(-1) ** j for j in sites]
    elif kind == "stark_staggered":
        coefficients = [j * (-1) ** j for j in sites]
    elif kind == "stark_linear":
        coefficients = list(sites)
    elif kind == "z2_geometric":
        coefficients = [Fraction((-6) ** j + 5, 11) for j in sites]
    elif kind == "custom":
        if custom is None or len(custom) != L:
            raise ModelError(f"custom sequence needs {L} coefficients, got {custom!r}")
        coefficients = custom
    else:
        raise ModelError(f"unknown sequence kind {kind!r}")
    return ProtectionSequence(kind=kind, coefficients=coefficients)


@dataclass(frozen=True)
class JumpOperator:
    label: str
    kind: Literal["matter", "gauge"]
    operator: OperatorMatrix


@dataclass(frozen=True)
class SectorProjector:
    sector: Tuple[int, ...]
    projector: OperatorMatrix
    rank: int


@dataclass(frozen=True)
class ComplianceReport:
    values: Dict[Tuple[int, ...], Fraction]
    target: Tuple[int, ...]
    compliant: bool
    offending: Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class ModelBundle:
    """Everything the noisy simulation needs to know about one gauge model."""

    model: ModelKind
    params: Union[U1Params, Z2Params]
    lattice: LatticeSpec
    h0: OperatorMatrix
    generators: Tuple[OperatorMatrix, ...]
    protection_quadratic: OperatorMatrix
    error_h1: OperatorMatrix
    jump_ops: Tuple[JumpOperator, ...]
    target_sector: Tuple[int, ...]
    matter_sigma_z: Tuple[OperatorMatrix, ...]
    pseudogenerators: Optional[Tuple[OperatorMatrix, ...]] = None
    protection_linear: Optional[OperatorMatrix] = None

    @property
    def L(self) -> int:
        return self.lattice.n_matter

    @property
    def dim(self) -> int:
        return self.lattice.dim

    def protection_generators(self, source: GeneratorSource = "full") -> Tuple[OperatorMatrix, ...]:
        if source == "full":
            return self.generators
        if self.pseudogenerators is None:
            raise ModelError(f"{self.model} model carries no pseudogenerators")
        return self.pseudogenerators

    def protection_target(self, source: GeneratorSource = "full") -> Tuple[int, ...]:
        # W_j = 1 on every state of the g^tar = +1 sector.
        if source == "pseudo":
            return tuple(1 for _ in self.target_sector)
        return self.target_sector

    def number_operators(self) -> Tuple[OperatorMatrix, ...]:
        identity = OperatorMatrix.identity(self.dim)
        return tuple((sz + identity) * 0.5 for sz in self.matter_sigma_z)


def _lattice(params: Union[U1Params, Z2Params]) -> LatticeSpec:
    return LatticeSpec(n_matter=params.L, boundary=params.boundary)


def _hermitian_pair(term: OperatorMatrix) -> OperatorMatrix:
    return (term + term.dagger()).as_hermitian()


def _matter_jumps(lattice: LatticeSpec, local_op: np.ndarray) -> List[JumpOperator]:
    return [
        JumpOperator(f"matter_{j}", "matter", embed_local(lattice, lattice.matter_index(j), local_op))
        for j in range(1, lattice.n_matter + 1)
    ]


def _gauge_jumps(lattice: LatticeSpec, local_op: np.ndarray) -> List[JumpOperator]:
    return [
        JumpOperator(f"link_{j}_{k}", "gauge", embed_local(lattice, lattice.link_index(j), local_op))
        for j, k in lattice.bonds()
    ]


def _select_jumps(matter: List[JumpOperator], gauge: List[JumpOperator], jumps: JumpSelection) -> Tuple[JumpOperator, ...]:
    if jumps == "matter":
        return tuple(matter)
    if jumps == "gauge":
        return tuple(gauge)
    return tuple(matter + gauge)


def _verify_gauge_symmetry(h0: OperatorMatrix, generators: Sequence[OperatorMatrix], model: str):
    scale = max(h0.norm_max(), 1.0)
    for j, g in enumerate(generators, start=1):
        residual = h0.commutator(g).norm_max()
        if residual > COMMUTATOR_TOL * scale:
            raise ModelError(f"{model}: [H0, G_{j}] has norm {residual:.3e}")


def _u1_generators(lattice: LatticeSpec) -> List[OperatorMatrix]:
    generators = []
    for j in range(1, lattice.n_matter + 1):
        charge = (SIGMA_Z + IDENTITY_2) / 2
        terms = [embed_local(lattice, lattice.matter_index(j), charge)]
        for link in (lattice.left_link(j), lattice.right_link(j)):
            if link is not None:
                terms.append(embed_local(lattice, link, S_Z))
        generators.append((operator_sum(terms, lattice.dim) * (-1) ** j).as_hermitian())
    return generators


def _z2_generators(lattice: LatticeSpec) -> List[OperatorMatrix]:
    generators = []
    for j in range(1, lattice.n_matter + 1):
        factors = {lattice.matter_index(j): PARITY}
        for link in (lattice.left_link(j), lattice.right_link(j)):
            if link is not None:
                factors[link] = SIGMA_X
        generators.append(embed_product(lattice, factors))
    return generators


def _z2_pseudogenerators(lattice: LatticeSpec, target: Sequence[int]) -> List[OperatorMatrix]:
    pseudo = []
    for j in range(1, lattice.n_matter + 1):
        links = {link: SIGMA_X for link in (lattice.left_link(j), lattice.right_link(j)) if link is not None}
        field = embed_product(lattice, links)
        occupation = embed_local(lattice, lattice.matter_index(j), NUMBER)
        pseudo.append((field + occupation * (2 * target[j - 1])).as_hermitian())
    return pseudo


def build_u1_qlm(
    params: U1Params,
    jumps: JumpSelection = "both",
    sequence: Optional[ProtectionSequence] = None,
) -> ModelBundle:
    """Spin-1/2 U(1) quantum link model with Gauss-law generators and σ^x / s^x noise channels."""
    lattice = _lattice(params)
    dim = lattice.dim

    terms = []
    for j, k in lattice.bonds():
        hop = embed_product(
            lattice,
            {
                lattice.matter_index(j): SIGMA_MINUS,
                lattice.link_index(j): S_PLUS,
                lattice.matter_index(k): SIGMA_MINUS,
            },
        )
        terms.append(_hermitian_pair(hop) * params.J)
    sigma_z = tuple(embed_local(lattice, lattice.matter_index(j), SIGMA_Z) for j in range(1, lattice.n_matter + 1))
    terms.extend(sz * (params.mu / 2) for sz in sigma_z)
    h0 = operator_sum(terms, dim).as_hermitian()

    generators = _u1_generators(lattice)
    _verify_gauge_symmetry(h0, generators, "u1")
    target = tuple(0 for _ in range(lattice.n_matter))

    matter = _matter_jumps(lattice, SIGMA_X)
    gauge = _gauge_jumps(lattice, S_X)

    bundle = ModelBundle(
        model="u1",
        params=params,
        lattice=lattice,
        h0=h0,
        generators=tuple(generators),
        protection_quadratic=OperatorMatrix.zeros(dim),
        error_h1=OperatorMatrix.zeros(dim),
        jump_ops=_select_jumps(matter, gauge, jumps),
        target_sector=target,
        matter_sigma_z=sigma_z,
    )
    bundle = _finish(bundle, sequence, "full")
    logger.info(f"Built U(1) QLM: L={params.L}, dim={dim}, {len(bundle.jump_ops)} jump operators")
    return bundle


def build_z2_lgt(
    params: Z2Params,
    jumps: JumpSelection = "both",
    sequence: Optional[ProtectionSequence] = None,
    source: GeneratorSource = "pseudo",
) -> ModelBundle:
    """Z₂ LGT with hardcore bosons a† = σ⁺, generators G_j and pseudogenerators W_j."""
    lattice = _lattice(params)
    dim = lattice.dim

    terms = []
    for j, k in lattice.bonds():
        hop = embed_product(
            lattice,
            {
                lattice.matter_index(j): SIGMA_PLUS,
                lattice.link_index(j): SIGMA_Z,
                lattice.matter_index(k): SIGMA_MINUS,
            },
        )
        terms.append(_hermitian_pair(hop) * params.J)
        terms.append(embed_local(lattice, lattice.link_index(j), SIGMA_X) * (-params.h))
    h0 = operator_sum(terms, dim).as_hermitian()

    generators = _z2_generators(lattice)
    _verify_gauge_symmetry(h0, generators, "z2")
    target = tuple(1 for _ in range(lattice.n_matter))

    matter = _matter_jumps(lattice, SIGMA_X)
    gauge = _gauge_jumps(lattice, SIGMA_Z)
    sigma_z = tuple(embed_local(lattice, lattice.matter_index(j), SIGMA_Z) for j in range(1, lattice.n_matter + 1))

    bundle = ModelBundle(
        model="z2",
        params=params,
        lattice=lattice,
        h0=h0,
        generators=tuple(generators),
        protection_quadratic=OperatorMatrix.zeros(dim),
        error_h1=OperatorMatrix.zeros(dim),
        jump_ops=_select_jumps(matter, gauge, jumps),
        target_sector=target,
        matter_sigma_z=sigma_z,
        pseudogenerators=tuple(_z2_pseudogenerators(lattice, target)),
    )
    bundle = _finish(bundle, sequence, source)
    logger.info(f"Built Z2 LGT: L={params.L}, dim={dim}, {len(bundle.jump_ops)} jump operators")
    return bundle


def build_model(
    params: Union[U1Params, Z2Params],
    jumps: JumpSelection = "both",
    sequence: Optional[ProtectionSequence] = None,
    source: GeneratorSource = "full",
) -> ModelBundle:
    if isinstance(params, U1Params):
        if source != "full":
            raise ModelError("the U(1) model has no pseudogenerators")
        return build_u1_qlm(params, jumps=jumps, sequence=sequence)
    return build_z2_lgt(params, jumps=jumps, sequence=sequence, source=source)


def _finish(bundle: ModelBundle, sequence: Optional[ProtectionSequence], source: GeneratorSource) -> ModelBundle:
    bundle = replace(
        bundle,
        protection_quadratic=build_quadratic_protection(bundle),
        error_h1=build_coherent_error(bundle),
    )
    if sequence is not None:
        bundle = replace(bundle, protection_linear=build_linear_protection(bundle, sequence, source))
    return bundle


def build_linear_protection(
    bundle: ModelBundle, seq: ProtectionSequence, source: GeneratorSource = "full"
) -> OperatorMatrix:
    """Σ_j c_j G_j, or Σ_j c_j W_j with source="pseudo"."""
    if seq.length != bundle.L:
        raise ModelError(f"sequence has {seq.length} coefficients for {bundle.L} sites")
    generators = bundle.protection_generators(source)
    terms = [g * float(c) for c, g in zip(seq.coefficients, generators)]
    return operator_sum(terms, bundle.dim).as_hermitian()


def build_quadratic_protection(bundle: ModelBundle) -> OperatorMatrix:
    """Σ_j (G_j − g^tar_j)², the energy penalty on gauge-variant states."""
    identity = OperatorMatrix.identity(bundle.dim)
    terms = []
    for g, target in zip(bundle.generators, bundle.target_sector):
        shifted = g - identity * target
        terms.append(shifted @ shifted)
    return operator_sum(terms, bundle.dim).as_hermitian()


def build_coherent_error(bundle: ModelBundle, etas: Optional[Sequence[float]] = None) -> OperatorMatrix:
    """Gauge-breaking error term Ĥ₁ (without the λ prefactor)."""
    lattice = bundle.lattice
    terms = []
    if bundle.model == "u1":
        link_norm = np.sqrt(0.5 * 1.5)
        for j, k in lattice.bonds():
            mj, mk, link = lattice.matter_index(j), lattice.matter_index(k), lattice.link_index(j)
            pair = embed_product(lattice, {mj: SIGMA_MINUS, mk: SIGMA_MINUS})
            terms.append(_hermitian_pair(pair))
            terms.append(embed_local(lattice, link, (S_X + S_Z) / link_norm))
    else:
        eta1, eta2, eta3, eta4 = etas if etas is not None else bundle.params.etas
        for j, k in lattice.bonds():
            mj, mk, link = lattice.matter_index(j), lattice.matter_index(k), lattice.link_index(j)
            dressing = eta1 * SIGMA_PLUS + eta2 * SIGMA_MINUS + IDENTITY_2
            hop = embed_product(lattice, {mj: SIGMA_PLUS, mk: SIGMA_MINUS, link: dressing})
            terms.append(_hermitian_pair(hop))
            terms.append(embed_product(lattice, {mj: NUMBER, link: SIGMA_Z}) * eta3)
            terms.append(embed_product(lattice, {mk: NUMBER, link: SIGMA_Z}) * (-eta4))
            terms.append(embed_local(lattice, link, SIGMA_Z))
    h1 = operator_sum(terms, bundle.dim).as_hermitian()

    scale = max(h1.norm_max(), 1.0)
    if all(h1.commutator(g).norm_max() <= COMMUTATOR_TOL * scale for g in bundle.generators):
        logger.warning(f"{bundle.model}: error term commutes with every generator")
    return h1


def sector_projectors(bundle: ModelBundle, source: GeneratorSource = "full") -> List[SectorProjector]:
    """Projectors onto the joint eigenspaces of the local generators."""
    spaces = joint_eigenspaces(bundle.protection_generators(source))
    projectors = []
    for label, basis in spaces:
        rounded = np.rint(label)
        if np.max(np.abs(rounded - np.array(label))) > 1e3 * GENERATOR_EIGENVALUE_TOL:
            raise ModelError(f"non-integer generator eigenvalues {label}")
        projector = OperatorMatrix(basis @ basis.conj().T, hermitian_hint=True)
        projectors.append(SectorProjector(tuple(int(v) for v in rounded), projector, basis.shape[1]))

    total = sum(p.rank for p in projectors)
    if total != bundle.dim:
        raise ModelError(f"sector projectors cover {total} of {bundle.dim} states")
    logger.debug(f"{bundle.model}: {len(projectors)} sectors from {source} generators")
    return projectors


def target_projector(bundle: ModelBundle) -> OperatorMatrix:
    for sector in sector_projectors(bundle):
        if sector.sector == bundle.target_sector:
            return sector.projector
    raise ModelError(f"target sector {bundle.target_sector} is not realized")


def check_compliance(
    seq: ProtectionSequence, sectors: Sequence[Sequence[int]], target: Sequence[int]
) -> ComplianceReport:
    """Compliant iff Σ_j c_j (g_j − g^tar_j) ≠ 0 for every sector g other than the target."""
    target = tuple(int(t) for t in target)
    if seq.length != len(target):
        raise ModelError(f"sequence has {seq.length} coefficients for {len(target)} sites")
    values = {}
    offending = []
    for sector in sectors:
        sector = tuple(int(g) for g in sector)
        value = sum((c * (g - t) for c, g, t in zip(seq.coefficients, sector, target)), Fraction(0))
        values[sector] = value
        if sector != target and value == 0:
            offending.append(sector)
    return ComplianceReport(values, target, not offending, tuple(offending))


def build_zeno_hamiltonian(bundle: ModelBundle, lam: float, source: GeneratorSource = "full") -> OperatorMatrix:
    """Σ_g P_g (H₀ + λĤ₁) P_g over the sectors of the protecting generators.

    With source="pseudo" the sum runs over the W_j sectors, the enlarged
    symmetry that pseudogenerator protection leaves behind.
    """
    full = bundle.h0 + bundle.error_h1 * lam
    blocks = [p.projector @ full @ p.projector for p in sector_projectors(bundle, source)]
    zeno = operator_sum(blocks, bundle.dim).as_hermitian()
    logger.debug(f"{bundle.model}: Zeno Hamiltonian from {len(blocks)} {source} sectors, lambda={lam}")
    return zeno


def maximal_mixing_violation(bundle: ModelBundle) -> float:
    """(1/L) Σ_j Tr{(I/d)(G_j − g^tar_j)²}."""
    return float(np.trace(bundle.protection_quadratic.entries).real) / (bundle.dim * bundle.L)


def _u1_links(occupation: Sequence[int], closing: Fraction) -> List[Fraction]:
    """Link s^z values solving Gauss's law G_j = 0, given the closing link (L,1)."""
    links = []
    previous = closing
    for j, n in enumerate(occupation, start=1):
        current = -previous - n
        links.append(current)
        previous = current
    if links[-1] != closing or any(abs(s) != Fraction(1, 2) for s in links):
        raise ModelError(f"no spin-1/2 link configuration in the target sector for occupation {occupation}")
    return links


def _z2_links(occupation: Sequence[int], closing: int) -> List[int]:
    """τ^x eigenvalues with (−1)^{n_j} τ^x_{j−1,j} τ^x_{j,j+1} = +1."""
    links = []
    previous = closing
    for n in occupation:
        current = (-1) ** n * previous
        links.append(current)
        previous = current
    if links[-1] != closing:
        raise ModelError(f"occupation {occupation} has odd boson parity on a ring")
    return links


def _domain_wall(L: int) -> List[int]:
    return [1 if j <= L // 2 else 0 for j in range(1, L + 1)]


def preset_bitstring(bundle: ModelBundle, preset: str) -> str:
    """Per-subsystem characters ('1', '0', '+', '-') for a named preset."""
    lattice = bundle.lattice
    L = lattice.n_matter
    if lattice.boundary != "periodic" or L % 2:
        raise ModelError(f"preset {preset!r} is defined for even L on a ring")
    if preset in U1_PRESETS and bundle.model != "u1" or preset in Z2_PRESETS and bundle.model != "z2":
        raise ModelError(f"preset {preset!r} does not belong to the {bundle.model} model")

    spin = {Fraction(1, 2): "1", Fraction(-1, 2): "0"}
    field = {1: "+", -1: "-"}
    if preset == "u1_vacuum":
        occupation = [0] * L
        links = [spin[s] for s in _u1_links(occupation, Fraction(1, 2))]
    elif preset == "u1_charge_proliferated":
        occupation = [1] * L
        links = [spin[s] for s in _u1_links(occupation, Fraction(-1, 2))]
    elif preset == "u1_domainwall_z":
        occupation = _domain_wall(L)
        links = [spin[s] for s in _u1_links(occupation, Fraction(-1, 2))]
    elif preset == "u1_domainwall_x":
        occupation = _domain_wall(L)
        links = ["+"] * L
    elif preset == "z2_cdw":
        occupation = [j % 2 for j in range(1, L + 1)]
        links = [field[t] for t in _z2_links(occupation, -1)]
    elif preset == "z2_domainwall_x":
        occupation = _domain_wall(L)
        links = [field[t] for t in _z2_links(occupation, -1)]
    elif preset == "z2_domainwall_z":
        occupation = _domain_wall(L)
        links = ["1"] * L
    else:
        raise ModelError(f"unknown preset {preset!r}")
    return "".join(f"{n}{link}" for n, link in zip(occupation, links))


def build_initial_state(bundle: ModelBundle, preset: str) -> np.ndarray:
    """Normalized product state for a named preset or a custom bitstring."""
    if preset in U1_PRESETS or preset in Z2_PRESETS:
        bitstring = preset_bitstring(bundle, preset)
        homogeneous = preset not in ("u1_domainwall_x", "z2_domainwall_z")
    else:
        bitstring = preset
        homogeneous = False

    if len(bitstring) != bundle.lattice.n_subsystems or set(bitstring) - set(LOCAL_STATES):
        raise ModelError(
            f"state {bitstring!r} must have {bundle.lattice.n_subsystems} characters from {sorted(LOCAL_STATES)}"
        )
    psi = product_state([LOCAL_STATES[c] for c in bitstring])

    if homogeneous:
        for j, (g, target) in enumerate(zip(bundle.generators, bundle.target_sector), start=1):
            mean = g.expectation(psi).real
            spread = np.linalg.norm(g.entries @ psi - target * psi)
            if abs(mean - target) > 1e-12 or spread > 1e-12:
                raise ModelError(f"preset {preset!r} is not in the target sector at site {j} (⟨G⟩={mean})")
    logger.debug(f"Initial state {preset!r} -> {bitstring}")
    return psi


def z2_local_eigenvalue_table() -> List[Dict[str, int]]:
    """g_j and w_j for every local configuration (n_j, τ^x_{j−1,j}, τ^x_{j,j+1})."""
    dims = (2, 2, 2)
    generator = embed_product(dims, {0: PARITY, 1: SIGMA_X, 2: SIGMA_X})
    fields = embed_product(dims, {1: SIGMA_X, 2: SIGMA_X})
    occupation = embed_local(dims, 0, NUMBER)
    rows = []
    for n in (0, 1):
        for left in (-1, 1):
            for right in (-1, 1):
                psi = product_state([UP if n else DOWN, PLUS_X if left > 0 else MINUS_X, PLUS_X if right > 0 else MINUS_X])
                row = {"n": n, "tau_left": left, "tau_right": right, "g": int(round(generator.expectation(psi).real))}
                for target in (1, -1):
                    w = fields + occupation * (2 * target)
                    row[f"w_tar{target:+d}"] = int(round(w.expectation(psi).real))
                rows.append(row)
    return rows
