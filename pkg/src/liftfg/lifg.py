"""Grouping unknown factors by symmetric local structure and transferring potentials.

When a factor's potentials are missing, the only usable similarity signal is
the graph around it.  Two factors have *symmetric 2-step neighbourhoods*
when they touch the same number of variables and those variables can be
matched one-to-one preserving evidence, range, and degree; they are
*possibly identical* when additionally at least one of them is unknown or
their tables are equal.

The lifting procedure runs in two phases on top of the initial colouring.
Phase 1 gives all mutually possibly-identical unknown factors one shared
colour and collects, per unknown factor, the candidate set of possibly
identical known factors.  Phase 2 picks the largest subset of each
candidate set whose members agree on one table, and, if the agreeing
fraction reaches the threshold, colours those candidates like the unknown
factor and transfers their table onto it.  Ordinary colour passing then
refines the pre-coloured graph and the result is compressed.

Because symmetry is implemented as signature equality (an equivalence), the
"largest pairwise possibly-identical subset" is simply the largest
table-equality class of the candidate set, which makes phase 2 a mode
computation instead of a clique search.
"""

from dataclasses import dataclass

import numpy as np

from .model import FactorGraph, Factor, PotentialTable, tables_equal
from . import cp


@dataclass(frozen=True)
class NeighbourhoodSignature:
    """Degree of a factor plus the multiset of its neighbours' (evidence, range, degree)."""

    factor_degree: int
    rv_signatures: tuple[tuple[int, tuple[str, ...], int], ...]  # sorted multiset


@dataclass(frozen=True)
class CandidateSet:
    """Per-unknown-factor record of phase 1/2: candidates and what was selected."""

    unknown_factor: str
    candidates: tuple[str, ...]
    selected: tuple[str, ...] | None
    shared_table: PotentialTable | None
    ratio: float | None
    transferred: bool = False


@dataclass(frozen=True)
class LiftReport:
    records: tuple[CandidateSet, ...]
    complete: bool

    def to_text(self) -> str:
        lines = []
        for r in self.records:
            source = r.selected[0] if r.transferred else "none"
            ratio = "nan" if r.ratio is None else repr(r.ratio)
            lines.append(f"unknown {r.unknown_factor} candidates {len(r.candidates)} "
                         f"selected {len(r.selected) if r.selected else 0} "
                         f"ratio {ratio} transferred {source}")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class LiftResult:
    """Outcome of a lifting pass.

    ``lifted`` is None when the graph stays semantically incomplete, and
    also in the rare case of a complete graph whose stable partition has a
    factor group with no consistent argument-slot alignment (equal tables
    can mask argument-order mismatches because factors compare neighbour
    colours as multisets); no counting-BP model exists for such a group.
    """

    completed: FactorGraph
    lifted: cp.LiftedModel | None
    report: LiftReport
    partition: cp.Partition


def two_step_neighbourhood(g: FactorGraph, factor_name: str) -> frozenset[str]:
    """All rvs adjacent to the factor plus all factors adjacent to those rvs.

    The factor itself is always included.  Names are unambiguous because the
    validator rejects rv/factor name collisions.
    """
    if factor_name not in g.factors:
        raise KeyError(f"no factor named {factor_name!r}")
    f = g.factors[factor_name]
    nodes = set(f.args)
    for rv in f.args:
        for other_name, other in g.factors.items():
            if rv in other.args:
                nodes.add(other_name)
    return frozenset(nodes)


def _degree_map(g: FactorGraph) -> dict[str, int]:
    degree = dict.fromkeys(g.rvs, 0)
    for f in g.factors.values():
        for a in f.args:
            degree[a] += 1
    return degree


def all_signatures(g: FactorGraph) -> dict[str, NeighbourhoodSignature]:
    """Neighbourhood signatures for every factor in one pass over the graph."""
    degree = _degree_map(g)
    out = {}
    for name, f in g.factors.items():
        triples = []
        for rv_name in f.args:
            rv = g.rvs[rv_name]
            ev = -1 if rv.evidence is None else rv.evidence
            triples.append((ev, rv.range, degree[rv_name]))
        out[name] = NeighbourhoodSignature(len(f.args), tuple(sorted(triples)))
    return out


def neighbourhood_signature(g: FactorGraph, factor_name: str) -> NeighbourhoodSignature:
    f = g.factors[factor_name]
    triples = []
    for rv_name in f.args:
        rv = g.rvs[rv_name]
        ev = -1 if rv.evidence is None else rv.evidence
        triples.append((ev, rv.range, g.rv_degree(rv_name)))
    return NeighbourhoodSignature(len(f.args), tuple(sorted(triples)))


def symmetric_neighbourhoods(g: FactorGraph, f_i: str, f_j: str) -> bool:
    """True iff the two factors' 2-step neighbourhoods are symmetric.

    Equality of the sorted triple multisets is equivalent to the existence
    of a neighbour bijection preserving evidence, range and degree.
    """
    return neighbourhood_signature(g, f_i) == neighbourhood_signature(g, f_j)


def possibly_identical(g: FactorGraph, f_i: str, f_j: str, pot_tol: float = 0.0) -> bool:
    if f_i == f_j:
        raise ValueError("possibly_identical is defined for distinct factors")
    if not symmetric_neighbourhoods(g, f_i, f_j):
        return False
    a, b = g.factors[f_i], g.factors[f_j]
    if a.is_unknown or b.is_unknown:
        return True
    return tables_equal(a.table, b.table, pot_tol)


def select_candidates(candidates, theta: float, pot_tol: float = 0.0):
    """Pick the largest table-equality class of a candidate set.

    candidates: known Factor objects sharing one neighbourhood signature.
    Returns (members sorted by name, shared table, ratio) or None when the
    set is empty or the agreeing fraction falls below theta.  Ties between
    equal-sized classes go to the class with the smallest member name.
    """
    candidates = sorted(candidates, key=lambda f: f.name)
    if not candidates:
        return None
    classes: list[list[Factor]] = []
    for f in candidates:
        for cls in classes:
            if tables_equal(cls[0].table, f.table, pot_tol):
                cls.append(f)
                break
        else:
            classes.append([f])
    # max() keeps the first maximum; classes arise in candidate name order,
    # so equal-sized ties go to the class with the smallest leading name.
    best = max(classes, key=len)
    ratio = len(best) / len(candidates)
    if ratio < theta:
        return None
    return tuple(f.name for f in best), best[0].table, ratio


def transfer_potentials(f_unknown: Factor, source: Factor, g: FactorGraph) -> PotentialTable:
    """Copy the source table onto the unknown factor's argument order.

    Arguments are matched by their (evidence, range, degree) triples; inside
    a block of equal triples they pair up in argument-list order.  The table
    axes are permuted accordingly.
    """
    def triples(f: Factor):
        out = []
        for rv_name in f.args:
            rv = g.rvs[rv_name]
            ev = -1 if rv.evidence is None else rv.evidence
            out.append((ev, rv.range, g.rv_degree(rv_name)))
        return out

    t_unknown, t_source = triples(f_unknown), triples(source)
    if sorted(t_unknown) != sorted(t_source) or len(t_unknown) != len(t_source):
        raise ValueError(f"{f_unknown.name} and {source.name} have no argument bijection")
    remaining: dict[tuple, list[int]] = {}
    for pos, tr in enumerate(t_source):
        remaining.setdefault(tr, []).append(pos)
    axes = [remaining[tr].pop(0) for tr in t_unknown]
    arr = np.transpose(source.table.array(), axes=axes)
    return PotentialTable.from_array(arr)


def run_lifg(g: FactorGraph, theta: float, position_mode: str = "canonical",
             pot_tol: float = 0.0) -> LiftResult:
    """Full lifting pass: group unknowns, transfer potentials, refine, compress.

    Returns the completed graph (unknown factors replaced where a transfer
    succeeded), the lifted model (withheld when any factor stays unknown),
    a per-unknown report, and the stable partition.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    init = cp.initial_colours(g, pot_tol)
    colours = dict(init.factor_colour)
    rv_colours = init.rv_colour

    signatures = all_signatures(g)
    by_signature: dict[NeighbourhoodSignature, list[str]] = {}
    for name in sorted(g.factors):
        by_signature.setdefault(signatures[name], []).append(name)

    unknown_names = sorted(name for name, f in g.factors.items() if f.is_unknown)

    # Phase 1: unknown factors with equal signatures share one colour; the
    # candidate set of an unknown factor is every known factor possibly
    # identical to it, i.e. every known factor with the same signature.
    candidates_of: dict[str, list[str]] = {}
    for name in unknown_names:
        peers = by_signature[signatures[name]]
        unknown_peers = [p for p in peers if g.factors[p].is_unknown]
        shared = colours[unknown_peers[0]]
        for p in unknown_peers:
            colours[p] = shared
        candidates_of[name] = [p for p in peers if not g.factors[p].is_unknown]

    # Phase 2: per unknown factor, mode of the candidate tables; transfer on
    # reaching theta.  Unknowns sharing a phase-1 colour have identical
    # candidate sets, so selections can never conflict within a class.
    records = []
    replacements: dict[str, Factor] = {}
    selected_by_colour: dict[int, tuple[str, ...]] = {}
    for name in unknown_names:
        cand = candidates_of[name]
        selection = select_candidates([g.factors[c] for c in cand], 0.0, pot_tol)
        if selection is None:
            records.append(CandidateSet(name, tuple(cand), None, None, None))
            continue
        members, table, ratio = selection
        if ratio < theta:
            records.append(CandidateSet(name, tuple(cand), members, table, ratio))
            continue
        colour = colours[name]
        if colour in selected_by_colour:
            assert selected_by_colour[colour] == members, (
                "phase-1 colour class produced conflicting selections")
        selected_by_colour[colour] = members
        for m in members:
            colours[m] = colour
        transferred = transfer_potentials(g.factors[name], g.factors[members[0]], g)
        replacements[name] = Factor(name, g.factors[name].args, transferred)
        records.append(CandidateSet(name, tuple(cand), members, table, ratio, True))

    completed = g.replace_factors(replacements) if replacements else g
    complete = not completed.has_unknown
    initial = cp.ColourAssignment(rv_colours, colours)
    partition = cp.run_cp(completed, position_mode, pot_tol, initial=initial)
    lifted = None
    if complete:
        try:
            lifted = cp.compress(completed, partition, position_mode)
        except ValueError:
            lifted = None   # stable partition without a slot-consistent lifting
    return LiftResult(completed, lifted, LiftReport(tuple(records), complete), partition)
