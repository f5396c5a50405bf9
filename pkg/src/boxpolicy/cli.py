"""Command-line surface and the on-disk policy format.

Five subcommands: ``simulate`` writes a synthetic draw as CSV, ``fit``
learns a box policy and saves it as JSON, ``eval`` scores a saved policy
either against a CSV or by Monte Carlo on a named scenario, ``render``
prints a saved policy as IF/ELSE rules, DOT, canonical JSON, or a decision
grid, and ``oracle`` runs the guarded exhaustive search for cross-checking
small fits.

Exit codes: 0 success, 1 bad usage, 2 data problem, 3 search budget
exhausted before any policy was found.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bnp import BnPConfig, fit
from .data import (
    DataError,
    Dataset,
    Hyperbox,
    Policy,
    box_memberships,
    load_csv,
    policy_decisions,
    spanned_boxes,
)
from .eval import EvalReport, empirical_objective, policy_value_mc, regret
from .nuisance import NuisanceModel, exact_nuisance, fit_plugin_nuisance
from .scores import METHODS, compute_scores, scale_scores
from .simgen import generate, get_scenario

FORMAT_VERSION = 1

#: Refuse to dump decision grids larger than this many lattice points.
GRID_CELL_GUARD = 1_000_000

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3

_DOCUMENT_KEYS = (
    "format_version",
    "d",
    "method",
    "m_max",
    "omega",
    "flipped",
    "objective",
    "boxes",
    "feature_names",
)


@dataclass(frozen=True)
class PolicyDocument:
    """A fitted policy plus the settings needed to reproduce its objective.

    This is the JSON artifact ``fit`` writes and ``eval``/``render`` read.
    ``boxes`` always stores every coordinate bound at full precision; the
    text renderers may abbreviate, the document never does.
    """

    format_version: int
    d: int
    method: str
    m_max: int
    omega: float
    flipped: bool
    objective: float
    boxes: tuple[Hyperbox, ...]
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.feature_names is not None:
            object.__setattr__(
                self, "feature_names", tuple(str(s) for s in self.feature_names)
            )
        if self.format_version != FORMAT_VERSION:
            raise DataError(
                f"unsupported policy format version {self.format_version!r}"
            )
        if self.d < 1:
            raise DataError("document dimension must be at least 1")
        if self.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.m_max < 0:
            raise DataError("m_max must be nonnegative")
        if len(self.boxes) > self.m_max:
            raise DataError("document holds more boxes than its m_max allows")
        if self.omega < 0:
            raise DataError("omega must be nonnegative")
        if not math.isfinite(self.objective):
            raise DataError("objective must be finite")
        for box in self.boxes:
            if box.d != self.d:
                raise DataError(
                    f"box dimension {box.d} does not match document dimension {self.d}"
                )
        if self.feature_names is not None and len(self.feature_names) != self.d:
            raise DataError("feature_names must name every dimension")


def as_policy(doc: PolicyDocument) -> Policy:
    """The decision rule stored in the document."""
    return Policy(boxes=doc.boxes, flipped=doc.flipped)


def _pos_zero(v: float) -> float:
    # adding 0.0 maps -0.0 to +0.0 and is the identity elsewhere
    return float(v) + 0.0


def serialize_document(doc: PolicyDocument) -> str:
    """Canonical single-line JSON; identical documents give identical bytes."""
    payload = {
        "format_version": doc.format_version,
        "d": doc.d,
        "method": doc.method,
        "m_max": doc.m_max,
        "omega": _pos_zero(doc.omega),
        "flipped": doc.flipped,
        "objective": _pos_zero(doc.objective),
        "boxes": [
            {
                "lower": [_pos_zero(v) for v in box.lower],
                "upper": [_pos_zero(v) for v in box.upper],
            }
            for box in doc.boxes
        ],
        "feature_names": (
            list(doc.feature_names) if doc.feature_names is not None else None
        ),
    }
    return json.dumps(payload)


def _require(raw: dict, key: str, kinds, what: str):
    value = raw[key]
    if isinstance(value, bool) and bool not in kinds:
        raise DataError(f"policy file field {key!r} must be {what}")
    if not isinstance(value, tuple(kinds)):
        raise DataError(f"policy file field {key!r} must be {what}")
    return value


def _parse_box(entry, d: int) -> Hyperbox:
    if not isinstance(entry, dict) or set(entry) != {"lower", "upper"}:
        raise DataError("each box must be an object with lower and upper lists")
    sides = []
    for key in ("lower", "upper"):
        vals = entry[key]
        if not isinstance(vals, list) or len(vals) != d:
            raise DataError(f"box {key} must list one bound per dimension")
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise DataError(f"box {key} bounds must be numbers")
        sides.append(tuple(float(v) for v in vals))
    return Hyperbox(lower=sides[0], upper=sides[1])


def parse_document(text: str) -> PolicyDocument:
    """Inverse of :func:`serialize_document`, with strict validation."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"policy file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError("policy file must hold a JSON object")
    unexpected = sorted(set(raw) - set(_DOCUMENT_KEYS))
    if unexpected:
        raise DataError(f"unexpected key(s) in policy file: {unexpected}")
    missing = sorted(set(_DOCUMENT_KEYS) - set(raw))
    if missing:
        raise DataError(f"policy file is missing key(s): {missing}")

    d = _require(raw, "d", (int,), "an integer")
    boxes_raw = _require(raw, "boxes", (list,), "a list")
    names = raw["feature_names"]
    if names is not None:
        if not isinstance(names, list) or not all(isinstance(s, str) for s in names):
            raise DataError("feature_names must be null or a list of strings")
        names = tuple(names)
    return PolicyDocument(
        format_version=_require(raw, "format_version", (int,), "an integer"),
        d=d,
        method=_require(raw, "method", (str,), "a string"),
        m_max=_require(raw, "m_max", (int,), "an integer"),
        omega=float(_require(raw, "omega", (int, float), "a number")),
        flipped=_require(raw, "flipped", (bool,), "a boolean"),
        objective=float(_require(raw, "objective", (int, float), "a number")),
        boxes=tuple(_parse_box(entry, d) for entry in boxes_raw),
        feature_names=names,
    )


# --------------------------------------------------------------------------
# rendering


def _feature_labels(doc: PolicyDocument) -> list[str]:
    if doc.feature_names is not None:
        return list(doc.feature_names)
    return [f"x{j}" for j in range(doc.d)]


def _fmt_bound(v: float) -> str:
    return f"{round(float(v), 2) + 0.0:.2f}"


def _box_conditions(
    doc: PolicyDocument,
    box: Hyperbox,
    observed_ranges: Sequence[tuple[float, float]] | None,
) -> list[str]:
    labels = _feature_labels(doc)
    conditions = []
    for j in range(doc.d):
        if observed_ranges is not None:
            lo, hi = observed_ranges[j]
            if box.lower[j] <= lo and box.upper[j] >= hi:
                continue
        conditions.append(
            f"{labels[j]} in [{_fmt_bound(box.lower[j])}, {_fmt_bound(box.upper[j])}]"
        )
    return conditions


def render_text(
    doc: PolicyDocument,
    observed_ranges: Sequence[tuple[float, float]] | None = None,
) -> str:
    """IF/ELSE-IF rule listing of the document's decision logic.

    When ``observed_ranges`` (one ``(low, high)`` pair per dimension) is
    given, a dimension whose interval covers the whole observed range is
    dropped from its clause; a box constraining nothing prints ``always``.
    Bounds show two decimals; the JSON document keeps full precision.
    """
    if observed_ranges is not None and len(observed_ranges) != doc.d:
        raise DataError("observed_ranges must cover every dimension")
    inside, outside = ("-1", "+1") if doc.flipped else ("+1", "-1")
    if not doc.boxes:
        return f"ALWAYS: assign {outside}"
    lines = []
    for k, box in enumerate(doc.boxes):
        conditions = _box_conditions(doc, box, observed_ranges)
        clause = " AND ".join(conditions) if conditions else "always"
        lines.append(f"{'IF' if k == 0 else 'ELSE IF'} {clause} THEN {inside}")
    lines.append(f"ELSE {outside}")
    return "\n".join(lines)


def render_dot(doc: PolicyDocument) -> str:
    """The same rule chain as a top-to-bottom DOT digraph.

    One diamond node per box (``rule_1`` .. ``rule_k``), a ``treat``
    terminal for the in-box decision and a ``fallback`` terminal, with
    yes/no edges chaining the rules in order.
    """
    inside, outside = ("-1", "+1") if doc.flipped else ("+1", "-1")
    lines = ["digraph policy {", "  rankdir=TB;"]
    if not doc.boxes:
        lines.append(f'  fallback [shape=box, label="assign {outside}"];')
        lines.append("}")
        return "\n".join(lines)
    for k, box in enumerate(doc.boxes, start=1):
        conditions = _box_conditions(doc, box, None)
        label = "\\nAND ".join(c.replace('"', '\\"') for c in conditions)
        lines.append(f'  rule_{k} [shape=diamond, label="{label}"];')
    lines.append(f'  treat [shape=box, label="assign {inside}"];')
    lines.append(f'  fallback [shape=box, label="assign {outside}"];')
    last = len(doc.boxes)
    for k in range(1, last + 1):
        lines.append(f'  rule_{k} -> treat [label="yes"];')
        target = f"rule_{k + 1}" if k < last else "fallback"
        lines.append(f'  rule_{k} -> {target} [label="no"];')
    lines.append("}")
    return "\n".join(lines)


def render_grid(
    doc: PolicyDocument,
    steps: int = 50,
    low: float = -1.0,
    high: float = 1.0,
) -> str:
    """CSV dump of decisions on a regular lattice over ``[low, high]^d``."""
    if steps < 2:
        raise DataError("need at least 2 grid steps per axis")
    if not (low < high):
        raise DataError("grid needs low < high")
    if steps**doc.d > GRID_CELL_GUARD:
        raise DataError(
            f"grid of {steps}^{doc.d} points exceeds the {GRID_CELL_GUARD} guard"
        )
    axis = np.linspace(low, high, steps)
    mesh = np.meshgrid(*([axis] * doc.d), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    decisions = policy_decisions(as_policy(doc), points)
    lines = [",".join(f"x{j}" for j in range(doc.d)) + ",decision"]
    for row, decision in zip(points, decisions):
        coords = ",".join(repr(float(v)) for v in row)
        lines.append(f"{coords},{int(decision)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# exhaustive reference search


def exhaustive_search(
    dataset: Dataset,
    scores,
    m_max: int,
    omega: float = 0.0,
    flip: bool = False,
) -> tuple[float, tuple[Hyperbox, ...]]:
    """Best union of at most ``m_max`` spanned boxes, by direct enumeration.

    Walks every subset of coverage-distinct spanned boxes, so it is
    exponential in the sample count and inherits the span enumeration's
    size guard. Returns the minimal penalized objective and one attaining
    box set.
    """
    x = dataset.x[scores.kept]
    t = dataset.t[scores.kept]
    if flip:
        t = -t
    psi = scores.psi
    n = scores.n
    treated = t == 1
    base = float(psi[treated].sum())
    delta = np.where(treated, -psi, psi)

    best_value = base / n
    best_selection: tuple[int, ...] = ()
    if m_max == 0:
        return best_value, ()

    boxes = spanned_boxes(Dataset(x=x, t=t, y=np.zeros(n)))
    member = box_memberships(boxes, x)
    first_with_pattern: dict[bytes, int] = {}
    for idx, row in enumerate(member):
        first_with_pattern.setdefault(row.tobytes(), idx)
    representative = sorted(first_with_pattern.values())
    patterns = member[representative]

    def descend(start: int, covered: np.ndarray, chosen: tuple[int, ...]) -> None:
        nonlocal best_value, best_selection
        if len(chosen) == m_max or start == len(patterns):
            return
        unions = patterns[start:] | covered
        values = (base + unions.astype(np.float64) @ delta) / n + omega * (
            len(chosen) + 1
        )
        j = int(np.argmin(values))
        if float(values[j]) < best_value:
            best_value = float(values[j])
            best_selection = chosen + (start + j,)
        if len(chosen) + 1 < m_max:
            for i in range(start, len(patterns)):
                descend(i + 1, covered | patterns[i], chosen + (i,))

    descend(0, np.zeros(n, dtype=bool), ())
    return best_value, tuple(boxes[representative[i]] for i in best_selection)


# --------------------------------------------------------------------------
# subcommands


def _resolve_nuisance(label: str, dataset: Dataset) -> NuisanceModel:
    if label == "kernel+logistic":
        return fit_plugin_nuisance(dataset)
    if label.startswith("exact:"):
        scenario = get_scenario(label[len("exact:") :])
        if scenario.d != dataset.d:
            raise DataError(
                f"scenario {scenario.id!r} works in {scenario.d} dimensions, "
                f"data has {dataset.d}"
            )
        return exact_nuisance(scenario)
    raise DataError(
        f"unknown nuisance {label!r}; expected kernel+logistic or exact:<scenario>"
    )


def _load_scored(args):
    dataset = load_csv(args.data, zero_one_labels=args.zero_one_labels)
    model = _resolve_nuisance(args.nuisance, dataset)
    scores = compute_scores(dataset, model, args.method)
    if args.scale_psi:
        scores = scale_scores(scores)
    return dataset, scores


def _write_csv(dataset: Dataset, path: str) -> None:
    columns = [f"x{j}" for j in range(dataset.d)] + ["t", "y"]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(columns) + "\n")
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            row.append(str(int(dataset.t[i])))
            row.append(repr(float(dataset.y[i])))
            handle.write(",".join(row) + "\n")


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _cmd_simulate(args) -> int:
    dataset = generate(args.scenario, args.n, args.seed)
    _write_csv(dataset, args.out)
    print(f"wrote {args.out} ({dataset.n} rows, {dataset.d} covariates)")
    return EXIT_OK


def _cmd_fit(args) -> int:
    dataset, scores = _load_scored(args)
    config = BnPConfig(
        m_max=args.max_boxes,
        omega=args.penalty,
        max_nodes=args.max_bnb_iters,
        pricing_time_limit=args.pricing_time_limit,
        flip=args.flip,
    )
    result = fit(dataset, scores, config)
    if not math.isfinite(result.objective):
        print(
            "error: search budget ran out before any policy was found",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    doc = PolicyDocument(
        format_version=FORMAT_VERSION,
        d=dataset.d,
        method=scores.method,
        m_max=config.m_max,
        omega=config.omega,
        flipped=config.flip,
        objective=result.objective,
        boxes=result.policy.boxes,
    )
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(serialize_document(doc) + "\n")
    print(f"wrote {args.out}: {len(doc.boxes)} box(es), objective {doc.objective!r}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    doc = parse_document(_read_text(args.policy))
    policy = as_policy(doc)
    if (args.data is None) == (args.scenario is None):
        print("error: eval needs exactly one of --data or --scenario", file=sys.stderr)
        return EXIT_USAGE
    if args.data is not None:
        dataset = load_csv(args.data, zero_one_labels=args.zero_one_labels)
        model = _resolve_nuisance(args.nuisance, dataset)
        scores = compute_scores(dataset, model, doc.method)
        if args.scale_psi:
            scores = scale_scores(scores)
        report = EvalReport(
            empirical_objective=empirical_objective(policy, dataset, scores),
            policy_value=None,
            regret=None,
            mc_samples=None,
            seed=None,
        )
    else:
        report = EvalReport(
            empirical_objective=None,
            policy_value=policy_value_mc(policy, args.scenario, args.mc, args.seed),
            regret=regret(policy, args.scenario, args.mc, args.seed),
            mc_samples=args.mc,
            seed=args.seed,
        )
    payload = {
        "empirical_objective": _maybe(report.empirical_objective),
        "policy_value": _maybe(report.policy_value),
        "regret": _maybe(report.regret),
        "mc_samples": report.mc_samples,
        "seed": report.seed,
    }
    print(json.dumps(payload))
    return EXIT_OK


def _maybe(value: float | None) -> float | None:
    return None if value is None else _pos_zero(value)


def _cmd_render(args) -> int:
    doc = parse_document(_read_text(args.policy))
    if args.format == "text":
        print(render_text(doc))
    elif args.format == "dot":
        print(render_dot(doc))
    elif args.format == "json":
        print(serialize_document(doc))
    else:
        sys.stdout.write(
            render_grid(doc, steps=args.grid_steps, low=args.grid_low, high=args.grid_high)
        )
    return EXIT_OK


def _cmd_oracle(args) -> int:
    dataset, scores = _load_scored(args)
    value, boxes = exhaustive_search(
        dataset, scores, args.max_boxes, omega=args.penalty, flip=args.flip
    )
    payload = {
        "objective": _pos_zero(value),
        "boxes": [
            {
                "lower": [_pos_zero(v) for v in box.lower],
                "upper": [_pos_zero(v) for v in box.upper],
            }
            for box in boxes
        ],
    }
    print(json.dumps(payload))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument plumbing


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str) -> None:
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """Raises on bad usage instead of calling sys.exit."""

    def error(self, message):
        raise _UsageError(self, message)


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="input CSV path")
    parser.add_argument(
        "--zero-one-labels",
        action="store_true",
        help="treatments in the CSV are coded 0/1 instead of -1/+1",
    )


def _add_score_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method", required=True, choices=METHODS, help="score construction"
    )
    parser.add_argument(
        "--nuisance",
        default="kernel+logistic",
        help="kernel+logistic (estimated) or exact:<scenario> (oracle)",
    )
    parser.add_argument(
        "--scale-psi",
        action="store_true",
        help="divide scores by their standard deviation",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="boxpolicy",
        description="Learn and inspect interpretable union-of-boxes treatment policies.",
        epilog="exit codes: 0 ok, 1 usage, 2 data, 3 budget exhausted without a policy",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sim = sub.add_parser("simulate", help="write a synthetic scenario draw as CSV")
    sim.add_argument("--scenario", required=True, help="scenario id, e.g. basic")
    sim.add_argument("--n", type=int, required=True, help="number of samples")
    sim.add_argument("--seed", type=int, required=True, help="generator seed")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(handler=_cmd_simulate)

    fit_parser = sub.add_parser("fit", help="learn a box policy from a CSV file")
    _add_data_arguments(fit_parser)
    _add_score_arguments(fit_parser)
    fit_parser.add_argument(
        "--max-boxes", type=int, required=True, help="largest allowed number of boxes"
    )
    fit_parser.add_argument(
        "--penalty", type=float, default=0.0, help="objective surcharge per box"
    )
    fit_parser.add_argument(
        "--flip",
        action="store_true",
        help="learn the region to withhold treatment from instead",
    )
    fit_parser.add_argument(
        "--max-bnb-iters",
        type=int,
        default=50,
        help="search node budget (default 50)",
    )
    fit_parser.add_argument(
        "--pricing-time-limit",
        type=float,
        default=180.0,
        help="seconds per box-search call (default 180)",
    )
    fit_parser.add_argument("--out", required=True, help="output policy JSON path")
    fit_parser.set_defaults(handler=_cmd_fit)

    ev = sub.add_parser("eval", help="score a saved policy")
    ev.add_argument("--policy", required=True, help="policy JSON path")
    ev.add_argument("--data", help="CSV path for the empirical objective")
    ev.add_argument(
        "--scenario", help="scenario id for Monte-Carlo value and regret"
    )
    ev.add_argument(
        "--mc", type=int, default=100_000, help="Monte-Carlo draws (default 100000)"
    )
    ev.add_argument("--seed", type=int, default=0, help="draw seed (default 0)")
    ev.add_argument(
        "--nuisance",
        default="kernel+logistic",
        help="nuisance spec for --data scoring (default kernel+logistic)",
    )
    ev.add_argument("--scale-psi", action="store_true", help=argparse.SUPPRESS)
    ev.add_argument(
        "--zero-one-labels",
        action="store_true",
        help="treatments in the CSV are coded 0/1 instead of -1/+1",
    )
    ev.set_defaults(handler=_cmd_eval)

    rd = sub.add_parser(
        "render", help="print a saved policy as rules, DOT, JSON, or a grid"
    )
    rd.add_argument("--policy", required=True, help="policy JSON path")
    rd.add_argument(
        "--format", required=True, choices=("text", "dot", "json", "grid")
    )
    rd.add_argument(
        "--grid-steps", type=int, default=50, help="lattice points per axis"
    )
    rd.add_argument("--grid-low", type=float, default=-1.0, help="lattice lower edge")
    rd.add_argument("--grid-high", type=float, default=1.0, help="lattice upper edge")
    rd.set_defaults(handler=_cmd_render)

    orc = sub.add_parser("oracle", help="exhaustive reference search on a tiny CSV")
    _add_data_arguments(orc)
    _add_score_arguments(orc)
    orc.add_argument(
        "--max-boxes", type=int, required=True, help="largest allowed number of boxes"
    )
    orc.add_argument(
        "--penalty", type=float, default=0.0, help="objective surcharge per box"
    )
    orc.add_argument("--flip", action="store_true", help=argparse.SUPPRESS)
    orc.set_defaults(handler=_cmd_oracle)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch, and translate failures into exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(exc.parser.format_usage())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits itself only for --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    raise SystemExit(run())
