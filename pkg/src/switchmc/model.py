"""Switched-chain models: parsing, validation, concretization, absorbing sets.

A model is a finite state space plus ``k`` modes.  Each mode is given as a
*structure matrix* whose cells are either exact probabilities or the
placeholder ``x`` ("some probability strictly between 0 and 1").  All
qualitative results in this package depend on the structure only; numeric
work (expected times, simulation) needs a concretized chain.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

PARSE_TOL = 1e-9
STOCHASTIC_TOL = 1e-12

FIXTURES = ("ex1", "ex2", "ex3", "ex4", "ex5")


class ModelError(ValueError):
    """Invalid model input.  ``line``/``column`` are 1-based when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ModelError("state space is empty")
        seen = set()
        for lab in self.labels:
            if not lab:
                raise ModelError("empty state label")
            if lab in seen:
                raise ModelError(f"duplicate state label {lab!r}")
            seen.add(lab)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown state label {label!r}") from None

    def indices(self, labels: Iterable[str]) -> frozenset[int]:
        return frozenset(self.index(lab) for lab in labels)

    def names(self, idx: Iterable[int]) -> list[str]:
        return [self.labels[i] for i in sorted(idx)]


@dataclass(frozen=True, eq=False)
class ModeSpec:
    """Structure matrix of one mode.

    ``values`` holds the exact entries (0 where the cell is ``x``) and
    ``free`` marks the ``x`` cells.
    """

    values: np.ndarray
    free: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        free = np.asarray(self.free, dtype=bool)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or free.shape != values.shape:
            raise ModelError(f"mode must be square, got shape {values.shape}")
        object.__setattr__(self, "values", _frozen(np.where(free, 0.0, values)))
        object.__setattr__(self, "free", _frozen(free))
        _check_rows(self.values, self.free)

    @classmethod
    def from_matrix(cls, matrix) -> "ModeSpec":
        """A fully exact spec (no ``x`` cells) from a numeric matrix."""
        m = np.asarray(matrix, dtype=float)
        return cls(m, np.zeros(m.shape, dtype=bool))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean mask of cells with positive probability."""
        s = (self.values > 0) | self.free
        s.setflags(write=False)
        return s

    @cached_property
    def absorbing(self) -> frozenset[int]:
        # structural rule: a diagonal exact 1, never a float comparison after arithmetic
        return frozenset(
            j for j in range(self.n) if not self.free[j, j] and self.values[j, j] == 1.0
        )

    def __eq__(self, other):
        if not isinstance(other, ModeSpec):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.free, other.free)

    def __hash__(self):
        return hash((self.values.tobytes(), self.free.tobytes()))


def _check_rows(values: np.ndarray, free: np.ndarray, line_of_row=None) -> None:
    n = values.shape[0]
    for i in range(n):
        line = line_of_row(i) if line_of_row else None
        row, fr = values[i], free[i]
        if np.any(row < 0) or np.any(row > 1):
            raise ModelError(f"row {i + 1}: entries must lie in [0, 1]", line)
        s = float(row.sum())
        if not fr[i] and row[i] == 1.0 and (fr.any() or np.count_nonzero(row) > 1):
            raise ModelError(f"row {i + 1}: absorbing row must have no other positive entries", line)
        if s > 1 + PARSE_TOL:
            raise ModelError(f"row {i + 1}: exact entries sum to {s:g} > 1", line)
        if not fr.any():
            if abs(s - 1) > PARSE_TOL:
                raise ModelError(f"row {i + 1}: entries sum to {s:g}, expected 1", line)
        else:
            if 1 - s <= PARSE_TOL:
                raise ModelError(
                    f"row {i + 1}: no probability mass left for its x cells", line
                )
            if fr.sum() + (row > 0).sum() < 2:
                # a lone x would have to equal 1, but x means strictly inside (0, 1)
                raise ModelError(
                    f"row {i + 1}: a single x with no other positive entry must be written as 1",
                    line,
                )


@dataclass(frozen=True, eq=False)
class Mode:
    """A concretized mode: a row-stochastic matrix with its structure."""

    matrix: np.ndarray
    spec: ModeSpec

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != self.spec.values.shape:
            raise ModelError("matrix shape does not match its structure")
        if np.any(m < 0) or np.any(m > 1):
            raise ModelError("probabilities must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1) > STOCHASTIC_TOL):
            raise ModelError("matrix is not row-stochastic")
        if not np.array_equal(m > 0, self.spec.support):
            raise ModelError("matrix does not match the structure of its spec")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def absorbing(self) -> frozenset[int]:
        return self.spec.absorbing


@dataclass(frozen=True)
class SwitchedChain:
    """State space plus an ordered set of mode structures."""

    states: StateSpace
    modes: tuple[ModeSpec, ...]
    mode_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.modes) == 0:
            raise ModelError("model has no modes")
        for i, m in enumerate(self.modes):
            if m.n != self.states.n:
                raise ModelError(
                    f"mode {i + 1} is {m.n}x{m.n} but there are {self.states.n} states"
                )
        names = tuple(self.mode_names) or tuple(str(i + 1) for i in range(len(self.modes)))
        if len(names) != len(self.modes):
            raise ModelError("mode_names length does not match mode count")
        if len(set(names)) != len(names):
            raise ModelError("duplicate mode name")
        object.__setattr__(self, "mode_names", names)

    @classmethod
    def from_matrices(cls, labels: Sequence[str], matrices, names: Sequence[str] = ()) -> "SwitchedChain":
        return cls(StateSpace(tuple(labels)), tuple(ModeSpec.from_matrix(m) for m in matrices), tuple(names))

    @property
    def n(self) -> int:
        return self.states.n

    @property
    def k(self) -> int:
        return len(self.modes)

    def restrict(self, mode_indices: Sequence[int]) -> "SwitchedChain":
        """Sub-chain keeping only the given (0-based) modes."""
        return SwitchedChain(
            self.states,
            tuple(self.modes[i] for i in mode_indices),
            tuple(self.mode_names[i] for i in mode_indices),
        )

    def concretize(self, strategy: str = "uniform") -> "ConcreteChain":
        rng = None
        if strategy != "uniform":
            m = re.fullmatch(r"random:(\d+)", strategy)
            if not m:
                raise ValueError(f"unknown concretization strategy {strategy!r}")
            rng = np.random.default_rng(int(m.group(1)))
        return ConcreteChain(self, tuple(concretize(s, rng=rng) for s in self.modes), strategy)


@dataclass(frozen=True)
class ConcreteChain:
    """A switched chain whose ``x`` cells have been assigned numbers."""

    chain: SwitchedChain
    modes: tuple[Mode, ...]
    strategy: str = "uniform"

    @property
    def states(self) -> StateSpace:
        return self.chain.states

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def k(self) -> int:
        return self.chain.k

    @cached_property
    def matrices(self) -> np.ndarray:
        """Stacked ``(k, n, n)`` transition matrices."""
        return _frozen(np.stack([m.matrix for m in self.modes]))


def concretize(spec: ModeSpec, rng: np.random.Generator | None = None) -> Mode:
    """Assign probabilities to the ``x`` cells of ``spec``.

    Without ``rng`` the residual mass of each row is split equally over its
    ``x`` cells.  With ``rng`` the split is drawn from a flat Dirichlet,
    floored so every ``x`` cell stays strictly positive.
    """
    m = np.array(spec.values, dtype=float)
    for i in range(spec.n):
        cols = np.flatnonzero(spec.free[i])
        if cols.size == 0:
            continue
        residual = 1.0 - float(spec.values[i].sum())
        if residual <= 0:
            raise ModelError(f"row {i + 1}: x cells with zero residual mass")
        if rng is None:
            m[i, cols] = residual / cols.size
        else:
            w = rng.dirichlet(np.ones(cols.size))
            w = np.maximum(w, 1e-6)
            m[i, cols] = residual * w / w.sum()
        # push round-off onto the largest free cell so the row sums exactly
        j = cols[np.argmax(m[i, cols])]
        m[i, j] += 1.0 - m[i].sum()
    return Mode(m, spec)


def absorbing_sets(chain: SwitchedChain) -> tuple[tuple[frozenset[int], ...], frozenset[int], frozenset[int]]:
    """Per-mode absorbing sets with their union and intersection."""
    per_mode = tuple(m.absorbing for m in chain.modes)
    return per_mode, frozenset().union(*per_mode), frozenset.intersection(*per_mode)


def is_absorbing_mode(mode: ModeSpec | Mode) -> bool:
    """True if every state can reach one of the mode's absorbing states."""
    from .graph import distances_to_set, simplified_graph

    spec = mode.spec if isinstance(mode, Mode) else mode
    if not spec.absorbing:
        return False
    return all(d < float("inf") for d in distances_to_set(simplified_graph(spec), spec.absorbing))


# --- text format ---------------------------------------------------------

_NUM = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")
_MODE = re.compile(r"mode\s+(\S+?)\s*:\s*$")


def parse_model(text: str) -> SwitchedChain:
    """Parse the plain-text model format.

    ::

        states: a1 a2 a3
        mode 1:
        0 x x
        0 1 0
        0 0 1
    """
    labels = None
    modes: list[tuple[str, int, list[tuple[int, list[tuple[float, bool]]]]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()
        if labels is None:
            if not stripped.startswith("states:"):
                raise ModelError("expected 'states:' header", lineno, col)
            labels = stripped[len("states:"):].split()
            try:
                StateSpace(tuple(labels))
            except ModelError as e:
                raise ModelError(str(e), lineno, col) from None
            continue
        m = _MODE.match(stripped)
        if m:
            modes.append((m.group(1), lineno, []))
            continue
        if stripped.startswith("mode"):
            raise ModelError("malformed mode header, expected 'mode <name>:'", lineno, col)
        if not modes:
            raise ModelError("matrix row before any 'mode <name>:' header", lineno, col)
        row = []
        for tok in re.finditer(r"\S+", line):
            t = tok.group(0)
            if t in ("x", "X", "×"):
                row.append((0.0, True))
            elif _NUM.fullmatch(t):
                row.append((float(t), False))
            else:
                raise ModelError(f"bad token {t!r}", lineno, tok.start() + 1)
        modes[-1][2].append((lineno, row))

    if labels is None:
        raise ModelError("empty model: missing 'states:' header")
    if not modes:
        raise ModelError("model has no modes")
    n = len(labels)
    specs, names = [], []
    for name, header_line, rows in modes:
        if len(rows) != n:
            raise ModelError(f"mode {name} has {len(rows)} rows, expected {n}", header_line)
        for lineno, row in rows:
            if len(row) != n:
                raise ModelError(f"row has {len(row)} entries, expected {n}", lineno)
        values = np.array([[v for v, _ in row] for _, row in rows])
        free = np.array([[f for _, f in row] for _, row in rows])
        try:
            _check_rows(values, free, line_of_row=lambda i: rows[i][0])
        except ModelError as e:
            raise ModelError(f"mode {name}: {e.args[0]}", e.line) from None
        specs.append(ModeSpec(values, free))
        names.append(name)
    try:
        return SwitchedChain(StateSpace(tuple(labels)), tuple(specs), tuple(names))
    except ModelError as e:
        raise ModelError(str(e), 1) from None


def _fmt(v: float) -> str:
    return str(int(v)) if v in (0.0, 1.0) else repr(float(v))


def dump_model(chain: SwitchedChain) -> str:
    out = ["states: " + " ".join(chain.states.labels)]
    for name, spec in zip(chain.mode_names, chain.modes):
        out.append(f"mode {name}:")
        for i in range(chain.n):
            out.append(" ".join("x" if spec.free[i, j] else _fmt(spec.values[i, j]) for j in range(chain.n)))
    return "\n".join(out) + "\n"


# --- JSON format -----------------------------------------------------------

def model_to_dict(chain: SwitchedChain) -> dict:
    return {
        "states": list(chain.states.labels),
        "modes": [
            {
                "name": name,
                "rows": [
                    ["x" if spec.free[i, j] else float(spec.values[i, j]) for j in range(chain.n)]
                    for i in range(chain.n)
                ],
            }
            for name, spec in zip(chain.mode_names, chain.modes)
        ],
    }


def parse_model_json(text: str) -> SwitchedChain:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(e.msg, e.lineno, e.colno) from None
    if not isinstance(doc, dict) or "states" not in doc or "modes" not in doc:
        raise ModelError("JSON model needs 'states' and 'modes' keys")
    labels = doc["states"]
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise ModelError("'states' must be a list of strings")
    specs, names = [], []
    for idx, m in enumerate(doc["modes"]):
        name = str(m.get("name", idx + 1))
        rows = m.get("rows")
        if not isinstance(rows, list) or len(rows) != len(labels) or any(
            not isinstance(r, list) or len(r) != len(labels) for r in rows
        ):
            raise ModelError(f"mode {name}: rows must form a {len(labels)}x{len(labels)} grid")
        free = [[c in ("x", "X") for c in r] for r in rows]
        try:
            values = [[0.0 if f else float(c) for c, f in zip(r, fr)] for r, fr in zip(rows, free)]
        except (TypeError, ValueError):
            raise ModelError(f"mode {name}: entries must be numbers or 'x'") from None
        try:
            specs.append(ModeSpec(np.array(values, dtype=float), np.array(free, dtype=bool)))
        except ModelError as e:
            raise ModelError(f"mode {name}: {e}") from None
        names.append(name)
    return SwitchedChain(StateSpace(tuple(labels)), tuple(specs), tuple(names))


def load_model(path, fmt: str = "text") -> SwitchedChain:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "json":
        return parse_model_json(text)
    if fmt != "text":
        raise ValueError(f"unknown model format {fmt!r}")
    return parse_model(text)


def fixture_text(name: str) -> str:
    """Text of a bundled worked-example model (``ex1`` .. ``ex5``)."""
    if name not in FIXTURES:
        raise KeyError(f"no fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return resources.files("switchmc.fixtures").joinpath(f"{name}.model").read_text(encoding="utf-8")


def load_fixture(name: str) -> SwitchedChain:
    return parse_model(fixture_text(name))
