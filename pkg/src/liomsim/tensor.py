"""Dense labeled-tensor engine and the qubit-wise contraction scheduler.

A closed expectation network is an ordered list of placed tensors in
application order along the chain's wires: ket caps, then the gate and
diagonal layers of the evolution sandwich, then bra caps.  The scheduler
absorbs every tensor whose leftmost wire is qubit 1, then qubit 2, and so
on, which keeps the open boundary of the partial contraction confined to a
window of wires and bounds the intermediate tensor rank.

Two leg counts are tracked per step.  The "dense" count treats every node
(including diagonal ones) as a full tensor with in/out legs on each wire;
this is the convention of the analytic open-leg bound and is what gets
checked against it.  The "memory" count is the number of axes the execution
engine actually holds, which is smaller because diagonal nodes share a
single index with their neighbours (a diagonal phase layer never needs
separate in/out axes).  Execution materializes arrays only when the peak
memory count is affordable; the scheduler itself is pure structure and runs
at any size.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FeasibilityError, StructuralError

# 2^24 complex entries is ~256 MiB; beyond that the dense engine refuses.
MAX_EXEC_AXES = 24

_SIDES = ("in", "out")


@dataclass(frozen=True)
class Leg:
    """One open tensor index: wire (site), time-slice id, and direction."""

    site: int
    slice: int
    side: str

    def __post_init__(self) -> None:
        if self.side not in _SIDES:
            raise StructuralError(f"leg side must be 'in' or 'out', got {self.side!r}")


@dataclass(frozen=True)
class DenseTensor:
    """Complex tensor with named legs; data is flat, row-major in leg order,
    every leg of extent 2."""

    legs: tuple[Leg, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        legs = tuple(self.legs)
        object.__setattr__(self, "legs", legs)
        if len(set(legs)) != len(legs):
            raise StructuralError(f"duplicate legs in tensor: {legs}")
        data = np.asarray(self.data, dtype=complex).ravel()
        if data.size != 2 ** len(legs):
            raise StructuralError(
                f"tensor with {len(legs)} legs needs {2 ** len(legs)} entries, got {data.size}"
            )
        if not np.all(np.isfinite(data)):
            raise StructuralError("tensor data contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def ndim(self) -> int:
        return len(self.legs)

    def as_array(self) -> np.ndarray:
        return self.data.reshape((2,) * self.ndim)


def contract(
    a: DenseTensor, b: DenseTensor, pairs: Sequence[tuple[Leg, Leg]]
) -> DenseTensor:
    """Contract two tensors over the given (leg of a, leg of b) pairs.

    Remaining legs keep their order, a's first then b's.  Paired axes are
    processed in ascending position within a so repeated runs sum in the
    same order bit for bit.
    """
    axes_a: list[int] = []
    axes_b: list[int] = []
    seen_a: set[int] = set()
    seen_b: set[int] = set()
    for leg_a, leg_b in pairs:
        try:
            ia = a.legs.index(leg_a)
        except ValueError:
            raise StructuralError(f"first tensor has no leg {leg_a}") from None
        try:
            ib = b.legs.index(leg_b)
        except ValueError:
            raise StructuralError(f"second tensor has no leg {leg_b}") from None
        if ia in seen_a or ib in seen_b:
            raise StructuralError(f"leg paired twice in contraction: {leg_a} / {leg_b}")
        seen_a.add(ia)
        seen_b.add(ib)
        axes_a.append(ia)
        axes_b.append(ib)
    order = np.argsort(axes_a, kind="stable") if axes_a else []
    axes_a = [axes_a[i] for i in order]
    axes_b = [axes_b[i] for i in order]
    out = np.tensordot(a.as_array(), b.as_array(), axes=(axes_a, axes_b))
    legs = tuple(l for i, l in enumerate(a.legs) if i not in seen_a) + tuple(
        l for i, l in enumerate(b.legs) if i not in seen_b
    )
    return DenseTensor(legs, out.ravel())


@dataclass(frozen=True)
class PlacedTensor:
    """A node of the expectation network.

    kind "cap_ket"/"cap_bra": length-2 vector on one wire (|0> or <0|).
    kind "gate": 2^w x 2^w matrix, rows = outgoing bits over `sites` order.
    kind "diag": length-2^w diagonal of an operator diagonal in the z basis.
    """

    name: str
    kind: str
    sites: tuple[int, ...]
    data: np.ndarray | None

    def __post_init__(self) -> None:
        if self.kind not in ("cap_ket", "cap_bra", "gate", "diag"):
            raise StructuralError(f"unknown placed-tensor kind {self.kind!r}")
        if self.kind.startswith("cap") and len(self.sites) != 1:
            raise StructuralError("caps act on exactly one wire")
        if len(set(self.sites)) != len(self.sites):
            raise StructuralError(f"placed tensor {self.name} repeats a wire: {self.sites}")

    @property
    def min_site(self) -> int:
        return min(self.sites)

    @property
    def width(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class ExpectationNetwork:
    """Closed network in application order with the truncation radii it was
    built for (radii may be None for ad-hoc networks; the analytic leg
    bound is then not checked)."""

    n_sites: int
    nodes: tuple[PlacedTensor, ...]
    r_u: int | None = None
    r_j: int | None = None


def open_leg_bound(r_u: int, r_j: int) -> int:
    """Worst-case open-leg bound 4 [ sum_{n=2}^{r_U} n(n-1) + 2(r_J - 1) + 2 ]
    for qubit-wise contraction of an expectation network with width cutoff
    r_U and range cutoff r_J."""
    return 4 * (sum(n * (n - 1) for n in range(2, r_u + 1)) + 2 * (r_j - 1) + 2)


@dataclass
class PlanStep:
    node_index: int
    name: str
    closed_indices: tuple[int, ...]
    open_legs_after: int
    mem_axes_after: int


@dataclass
class ContractionPlan:
    """Structural schedule: absorption order, per-step predicted leg counts,
    and the index bookkeeping the executor replays.

    order: node positions in absorption order.
    node_indices: per node, its index ids in axis order (gate: out ids then
        in ids; diag: one shared id per wire; caps: one id).
    index_endpoints: per index id, how many nodes carry it.
    """

    n_sites: int
    order: list[int]
    steps: list[PlanStep]
    node_indices: list[tuple[int, ...]]
    index_endpoints: list[int]
    peak_open_legs: int
    peak_mem_axes: int
    r_u: int | None
    r_j: int | None
    last_observed_peak: int | None = field(default=None, compare=False)

    def to_json(self) -> str:
        payload = {
            "n_sites": self.n_sites,
            "peak_open_legs": self.peak_open_legs,
            "peak_mem_axes": self.peak_mem_axes,
            "r_u": self.r_u,
            "r_j": self.r_j,
            "steps": [
                {
                    "node": s.node_index,
                    "name": s.name,
                    "closed_indices": list(s.closed_indices),
                    "open_legs_after": s.open_legs_after,
                    "mem_axes_after": s.mem_axes_after,
                }
                for s in self.steps
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _as_network(network: "ExpectationNetwork | Iterable[PlacedTensor]") -> ExpectationNetwork:
    if isinstance(network, ExpectationNetwork):
        return network
    nodes = tuple(network)
    if not nodes:
        raise StructuralError("empty network")
    n_sites = max(max(node.sites) for node in nodes)
    return ExpectationNetwork(n_sites=n_sites, nodes=nodes)


def _wire_sequences(net: ExpectationNetwork) -> dict[int, list[int]]:
    """Per wire, node positions touching it in application order; validates
    closure (one ket cap first, one bra cap last, none in between)."""
    wires: dict[int, list[int]] = {}
    for pos, node in enumerate(net.nodes):
        for s in node.sites:
            if not (1 <= s <= net.n_sites):
                raise StructuralError(f"node {node.name} touches wire {s} outside 1..{net.n_sites}")
            wires.setdefault(s, []).append(pos)
    for w, seq in wires.items():
        kinds = [net.nodes[p].kind for p in seq]
        if kinds[0] != "cap_ket" or kinds[-1] != "cap_bra":
            raise StructuralError(
                f"wire {w} is not closed: first/last nodes are {kinds[0]}/{kinds[-1]}"
            )
        if any(k.startswith("cap") for k in kinds[1:-1]):
            raise StructuralError(f"wire {w} has a cap in the interior")
    return wires


def qubitwise_schedule(network: "ExpectationNetwork | Iterable[PlacedTensor]") -> ContractionPlan:
    """Build the qubit-wise plan: absorb all tensors whose leftmost wire is
    qubit 1 (in application order), then qubit 2, and so on.  Pure
    structure; tensor data never enters."""
    net = _as_network(network)
    wires = _wire_sequences(net)
    n_nodes = len(net.nodes)

    # Index (hyperedge) construction: walking each wire, a fresh index opens
    # after every non-diagonal node; diagonal nodes share the index they sit
    # on instead of cutting it.
    node_in: list[dict[int, int]] = [dict() for _ in range(n_nodes)]
    node_out: list[dict[int, int]] = [dict() for _ in range(n_nodes)]
    node_diag: list[dict[int, int]] = [dict() for _ in range(n_nodes)]
    index_endpoints: list[int] = []
    # Dense-convention bonds: consecutive nodes on a wire share one bond.
    bonds: list[tuple[int, int]] = []

    def new_index() -> int:
        index_endpoints.append(0)
        return len(index_endpoints) - 1

    for w, seq in wires.items():
        current = new_index()
        node_out[seq[0]][w] = current
        index_endpoints[current] += 1
        for pos in seq[1:]:
            node = net.nodes[pos]
            if node.kind == "diag":
                node_diag[pos][w] = current
                index_endpoints[current] += 1
            else:
                node_in[pos][w] = current
                index_endpoints[current] += 1
                if node.kind != "cap_bra":
                    current = new_index()
                    node_out[pos][w] = current
                    index_endpoints[current] += 1
        for left, right in zip(seq, seq[1:]):
            bonds.append((left, right))

    def node_index_ids(pos: int) -> tuple[int, ...]:
        node = net.nodes[pos]
        if node.kind == "diag":
            return tuple(node_diag[pos][w] for w in node.sites)
        if node.kind == "cap_ket":
            return (node_out[pos][node.sites[0]],)
        if node.kind == "cap_bra":
            return (node_in[pos][node.sites[0]],)
        return tuple(node_out[pos][w] for w in node.sites) + tuple(
            node_in[pos][w] for w in node.sites
        )

    node_indices = [node_index_ids(pos) for pos in range(n_nodes)]

    order = sorted(range(n_nodes), key=lambda pos: (net.nodes[pos].min_site, pos))

    # Replay the absorption to predict both leg counts.
    absorbed_count = [0] * len(index_endpoints)
    open_mem = 0
    bond_by_node: list[list[int]] = [[] for _ in range(n_nodes)]
    for b, (left, right) in enumerate(bonds):
        bond_by_node[left].append(b)
        bond_by_node[right].append(b)
    bond_state = [0] * len(bonds)  # endpoints absorbed so far
    open_dense = 0
    steps: list[PlanStep] = []
    peak_dense = 0
    peak_mem = 0
    for pos in order:
        closed: list[int] = []
        for idx in node_indices[pos]:
            if absorbed_count[idx] == 0:
                open_mem += 1
            absorbed_count[idx] += 1
            if absorbed_count[idx] == index_endpoints[idx]:
                open_mem -= 1
                closed.append(idx)
        for b in bond_by_node[pos]:
            bond_state[b] += 1
            if bond_state[b] == 1:
                open_dense += 1
            else:
                open_dense -= 1
        peak_dense = max(peak_dense, open_dense)
        peak_mem = max(peak_mem, open_mem)
        steps.append(
            PlanStep(
                node_index=pos,
                name=net.nodes[pos].name,
                closed_indices=tuple(closed),
                open_legs_after=open_dense,
                mem_axes_after=open_mem,
            )
        )
    if open_mem != 0 or open_dense != 0:
        raise StructuralError(
            f"network is not closed: {open_mem} indices / {open_dense} bonds left open"
        )
    return ContractionPlan(
        n_sites=net.n_sites,
        order=order,
        steps=steps,
        node_indices=node_indices,
        index_endpoints=index_endpoints,
        peak_open_legs=peak_dense,
        peak_mem_axes=peak_mem,
        r_u=net.r_u,
        r_j=net.r_j,
    )


_KET = np.array([1.0, 0.0], dtype=complex)


def _node_array(node: PlacedTensor) -> np.ndarray:
    if node.kind == "cap_ket" or node.kind == "cap_bra":
        if node.data is None:
            return _KET
        return np.asarray(node.data, dtype=complex).reshape(2)
    w = node.width
    if node.kind == "diag":
        return np.asarray(node.data, dtype=complex).reshape((2,) * w)
    return np.asarray(node.data, dtype=complex).reshape((2,) * (2 * w))


class PlanRunner:
    """Stepwise executor of a contraction plan.

    The observed number of live axes is checked against the plan at every
    step, and the plan's dense-leg peak is checked against the analytic
    bound when the network carries its radii; both failures are internal
    assertion errors, not user errors.  Networks whose predicted peak
    exceeds max_axes are refused up front.

    Beyond one-shot execution the runner can pause between steps, fork
    (duplicate the partial contraction), and override the values of
    diagonal nodes not yet absorbed.  The chain-rule sampler leans on all
    three: the shared left part of the chain is contracted once, and each
    site's outcome probabilities come from cheap forks that finish the
    remaining wires.
    """

    def __init__(
        self,
        plan: ContractionPlan,
        network: "ExpectationNetwork | Iterable[PlacedTensor]",
        max_axes: int = MAX_EXEC_AXES,
    ) -> None:
        net = _as_network(network)
        if len(net.nodes) != len(plan.node_indices):
            raise StructuralError(
                "plan was produced for a different network (node count differs)"
            )
        if plan.r_u is not None and plan.r_j is not None:
            bound = open_leg_bound(plan.r_u, plan.r_j)
            if plan.peak_open_legs > bound:
                raise AssertionError(
                    f"scheduler bug: predicted open legs {plan.peak_open_legs} exceed the "
                    f"analytic bound {bound} for (r_U={plan.r_u}, r_J={plan.r_j})"
                )
        if plan.peak_mem_axes > max_axes:
            raise FeasibilityError(
                f"contraction needs 2^{plan.peak_mem_axes} intermediate entries, above the "
                f"2^{max_axes} engine cap; use the dense small-N path instead"
            )
        self.plan = plan
        self.net = net
        self._acc = np.ones((), dtype=complex)
        self._acc_ids: list[int] = []
        self._absorbed = [0] * len(plan.index_endpoints)
        self._pos = 0
        self._observed_peak = 0
        self._overrides: dict[int, np.ndarray] = {}
        self._step_of = {step.node_index: i for i, step in enumerate(plan.steps)}

    @property
    def position(self) -> int:
        return self._pos

    def step_of(self, node_index: int) -> int:
        return self._step_of[node_index]

    def fork(self) -> "PlanRunner":
        twin = object.__new__(PlanRunner)
        twin.plan = self.plan
        twin.net = self.net
        twin._acc = self._acc.copy()
        twin._acc_ids = list(self._acc_ids)
        twin._absorbed = list(self._absorbed)
        twin._pos = self._pos
        twin._observed_peak = self._observed_peak
        twin._overrides = dict(self._overrides)
        twin._step_of = self._step_of
        return twin

    def set_override(self, node_index: int, values: np.ndarray) -> None:
        """Replace the data of a not-yet-absorbed diagonal node for this
        runner only (forks made afterwards inherit the override)."""
        node = self.net.nodes[node_index]
        if node.kind != "diag":
            raise StructuralError(f"only diagonal nodes can be overridden, {node.name} is {node.kind}")
        if self._step_of[node_index] < self._pos:
            raise StructuralError(f"node {node.name} was already absorbed")
        arr = np.asarray(values, dtype=complex).reshape((2,) * node.width)
        self._overrides[node_index] = arr

    def step(self) -> None:
        plan = self.plan
        step = plan.steps[self._pos]
        node = self.net.nodes[step.node_index]
        ids = plan.node_indices[step.node_index]
        if step.node_index in self._overrides:
            arr = self._overrides[step.node_index]
        else:
            arr = _node_array(node)
        absorbed = self._absorbed
        for idx in ids:
            absorbed[idx] += 1
        keep = [
            idx
            for idx in dict.fromkeys(list(self._acc_ids) + list(ids))
            if absorbed[idx] < plan.index_endpoints[idx]
        ]
        letters = string.ascii_letters
        local: dict[int, str] = {}
        for idx in dict.fromkeys(list(self._acc_ids) + list(ids) + keep):
            if idx not in local:
                local[idx] = letters[len(local)]
        sub = (
            "".join(local[i] for i in self._acc_ids)
            + ","
            + "".join(local[i] for i in ids)
            + "->"
            + "".join(local[i] for i in keep)
        )
        self._acc = np.einsum(sub, self._acc, arr)
        self._acc_ids = keep
        self._observed_peak = max(self._observed_peak, len(keep))
        if len(keep) != step.mem_axes_after:
            raise AssertionError(
                f"scheduler bug: step {step.name} left {len(keep)} axes open, "
                f"plan predicted {step.mem_axes_after}"
            )
        self._pos += 1

    def run_to(self, stop: int) -> None:
        while self._pos < stop:
            self.step()

    def finish(self) -> complex:
        self.run_to(len(self.plan.steps))
        if self._acc_ids:
            raise AssertionError("scheduler bug: axes left open after the final step")
        self.plan.last_observed_peak = self._observed_peak
        return complex(self._acc)


def execute(
    plan: ContractionPlan,
    network: "ExpectationNetwork | Iterable[PlacedTensor]",
    max_axes: int = MAX_EXEC_AXES,
) -> complex:
    """Run the plan on the network's data and return the scalar value."""
    return PlanRunner(plan, network, max_axes).finish()


def naive_network_value(network: "ExpectationNetwork | Iterable[PlacedTensor]") -> complex:
    """Reference evaluation: expand every node (diagonals included) to a
    DenseTensor with explicit legs and fold the network left to right with
    pairwise contract() calls.  Exponential in network size; test use only.
    """
    net = _as_network(network)
    wires = _wire_sequences(net)
    # Assign dense-convention bond labels: bond p on wire w pairs the "out"
    # leg of its left node with the "in" leg of its right node.
    leg_of_node: list[list[tuple[Leg, str]]] = [[] for _ in net.nodes]
    for w, seq in wires.items():
        for p, (left, right) in enumerate(zip(seq, seq[1:])):
            leg = Leg(site=w, slice=p, side="out")
            pair = Leg(site=w, slice=p, side="in")
            leg_of_node[left].append((leg, "out"))
            leg_of_node[right].append((pair, "in"))

    def to_dense(pos: int) -> DenseTensor:
        node = net.nodes[pos]
        arr = _node_array(node)
        if node.kind == "diag":
            w = node.width
            full = np.zeros((2,) * (2 * w), dtype=complex)
            flat = arr.ravel()
            eye = full.reshape(2**w, 2**w)
            np.fill_diagonal(eye, flat)
            arr = full
        outs = [leg for leg, side in leg_of_node[pos] if side == "out"]
        ins = [leg for leg, side in leg_of_node[pos] if side == "in"]
        # Row-major gate layout: out axes over node.sites order, then in axes.
        outs_sorted = sorted(outs, key=lambda l: node.sites.index(l.site))
        ins_sorted = sorted(ins, key=lambda l: node.sites.index(l.site))
        if node.kind == "cap_ket":
            return DenseTensor(tuple(outs_sorted), arr)
        if node.kind == "cap_bra":
            return DenseTensor(tuple(ins_sorted), arr)
        return DenseTensor(tuple(outs_sorted) + tuple(ins_sorted), arr)

    acc = DenseTensor((), np.ones(1, dtype=complex))
    for pos in range(len(net.nodes)):
        t = to_dense(pos)
        # The "out" half of a bond always sits on the earlier node, so when
        # folding in network order only acc-out/t-in pairs can match.
        shared = [
            (leg_a, Leg(leg_a.site, leg_a.slice, "in"))
            for leg_a in acc.legs
            if leg_a.side == "out" and Leg(leg_a.site, leg_a.slice, "in") in t.legs
        ]
        acc = contract(acc, t, shared)
    if acc.legs:
        raise StructuralError(f"network did not close; legs left: {acc.legs}")
    return complex(acc.data[0])
