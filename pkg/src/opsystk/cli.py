"""opsystk CLI - cone, map and tensor queries on finite-dimensional operator systems."""

from __future__ import annotations

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, Optional

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler

from opsystk import FORMAT_VERSION, __version__
from opsystk.atlas import suites
from opsystk.atlas.canonical import MAP_NAMES, SYSTEM_NAMES, canonical, canonical_map
from opsystk.errors import InputError, ToolkitError
from opsystk.formatters import (
    format_boundary_csv,
    format_boundary_table,
    format_error_json,
    format_json,
    format_mapping,
    format_suite_table,
    format_system_detail,
    format_verdict,
)
from opsystk.formatters.json_fmt import (
    dumps,
    element_from_doc,
    element_to_doc,
    loads,
    map_from_doc,
    map_to_doc,
    query_from_doc,
    read_matrix,
    subspace_from_doc,
    system_from_doc,
    system_to_doc,
)
from opsystk.linalg.sdpcore import DEFAULT_TOL
from opsystk.systems.dualize import dual_map, dual_system
from opsystk.systems.matricial import (
    numerical_range_boundary,
    numerical_range_member,
    omax_member,
    omax_system,
    omin_member,
    omin_system,
)
from opsystk.systems.opsys import (
    DEFAULT_RESTARTS,
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    cone_member,
    cp_check,
    kpos_refute,
    norm_bounds,
    require_verified,
)
from opsystk.systems.quotient import coproduct, quotient_system
from opsystk.systems.tensor import max_cone_member, min_cone_member, tensor_max, tensor_min

# CLI app
app = typer.Typer(
    name="opsystk",
    help="Operator systems: cones, duals, quotients and tensor products with checkable certificates",
    no_args_is_help=True,
)

# Console for errors and logs
console = Console(stderr=True)
logger = logging.getLogger(__name__)

EXIT_CODES = {Answer.MEMBER: 0, Answer.NOT_MEMBER: 1, Answer.UNDECIDED: 2}
STATUS_EXIT = {"pass": 0, "fail": 1, "undecided": 2}

# Shared options
SystemOpt = Annotated[str, typer.Option("--system", "-s", help="System JSON file or canonical name")]
ElementOpt = Annotated[Path, typer.Option("--element", "-e", help="Element JSON file")]
MapOpt = Annotated[str, typer.Option("--map", "-m", help="Map JSON file or canonical map name")]
TolOpt = Annotated[float, typer.Option("--tol", help="Numerical tolerance")]
BudgetOpt = Annotated[int, typer.Option("--budget", min=1, help="Search restarts")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="Search seed (default: OSTK_SEED or 0)")]
HierOpt = Annotated[Optional[int], typer.Option("--hier-level", min=1, help="Block level of the max-cone hierarchy")]
JsonOutOpt = Annotated[Optional[Path], typer.Option("--json-out", help="Write the full JSON result to this file")]
JsonOpt = Annotated[bool, typer.Option("--json", help="Output as JSON")]
NameOpt = Annotated[Optional[str], typer.Option("--name", help="Name of the new system")]


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def handle_error(e: ToolkitError, use_json: bool = False) -> None:
    """Handle toolkit errors with appropriate output format."""
    if use_json or not sys.stdout.isatty():
        print(format_error_json(e.to_dict()))
    else:
        console.print(f"[red]Error:[/red] {e.message}")
        if e.suggestion:
            console.print(f"[dim]{e.suggestion}[/dim]")
    raise typer.Exit(e.exit_code)


@contextmanager
def guarded(use_json: bool) -> Iterator[None]:
    """Map toolkit errors to their exit codes and anything unexpected to 4."""
    try:
        yield
    except typer.Exit:
        raise
    except ToolkitError as e:
        handle_error(e, use_json)
    except Exception as e:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        handle_error(ToolkitError(f"internal error: {type(e).__name__}: {e}"), use_json)


def _human(use_json: bool) -> bool:
    return not use_json and sys.stdout.isatty()


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise InputError(f"--tol must be positive, got {tol}")


def resolve_seed(seed: int | None) -> int:
    return suites.get_seed() if seed is None else seed


# -----------------------------------------------------------------------------
# Loading
# -----------------------------------------------------------------------------


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e


def read_document(path: Path) -> Any:
    return loads(_read_text(path), str(path))


def _is_file_ref(ref: str) -> bool:
    return ref.endswith(".json") or Path(ref).is_file()


def load_system(ref: str) -> OperatorSystem:
    if _is_file_ref(ref):
        return system_from_doc(read_document(Path(ref)))
    return canonical(ref)


def load_map(ref: str) -> LinearMapSpec:
    if _is_file_ref(ref):
        return map_from_doc(read_document(Path(ref)))
    return canonical_map(ref)


def load_element(path: Path, system: OperatorSystem) -> LevelElement:
    return element_from_doc(read_document(path), system)


# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------


def _write(path: Path | None, text: str) -> None:
    if path is not None:
        path.write_text(text + "\n")


def decide(
    u: LevelElement,
    tol: float,
    hier_level: int | None = None,
    seed: int | None = None,
    budget: int = DEFAULT_RESTARTS,
) -> tuple[LevelElement, ConeVerdict]:
    """Cone verdict for u, passing search knobs to the oracles that take them."""
    u = u.hermitian()
    system = u.system
    if system.spatial:
        return u, cone_member(u, tol)
    if system.kind is SystemKind.TENSOR_MAX:
        return u, max_cone_member(u, tol, hier_level=hier_level, seed=seed)
    if system.kind is SystemKind.TENSOR_MIN:
        return u, min_cone_member(u, tol, budget=budget)
    if system.kind is SystemKind.OMIN_K:
        return u, omin_member(u, tol, budget=budget, seed=seed)
    if system.kind is SystemKind.OMAX_K:
        return u, omax_member(u, tol, seed=seed)
    return u, cone_member(u, tol)


def emit_verdict(
    verdict: ConeVerdict,
    subject: Any,
    label: str,
    use_json: bool,
    json_out: Path | None,
    meta: dict[str, Any],
) -> None:
    """Re-verify, print, and exit with the verdict's code."""
    require_verified(subject, verdict)
    _write(json_out, format_json(verdict, meta, pretty=True))
    if _human(use_json):
        format_verdict(verdict, label)
    else:
        print(format_json(verdict, meta))
    raise typer.Exit(EXIT_CODES[verdict.answer])


def emit_system(system: OperatorSystem, use_json: bool, json_out: Path | None) -> None:
    _write(json_out, dumps(system_to_doc(system), pretty=True))
    if _human(use_json):
        format_system_detail(system)
    else:
        print(format_json(system.summary()))


def emit_map(phi: LinearMapSpec, use_json: bool, json_out: Path | None) -> None:
    _write(json_out, dumps(map_to_doc(phi), pretty=True))
    summary = {"name": phi.name, "source": phi.source.name, "target": phi.target.name, "rank": _rank(phi)}
    if _human(use_json):
        format_mapping(summary, title=phi.name)
    else:
        print(format_json(summary))


def _rank(phi: LinearMapSpec) -> int:
    return int(np.linalg.matrix_rank(phi.images))


def emit_data(data: dict[str, Any], title: str, use_json: bool, json_out: Path | None, meta: dict[str, Any]) -> None:
    _write(json_out, format_json(data, meta, pretty=True))
    if _human(use_json):
        format_mapping(data, title=title)
    else:
        print(format_json(data, meta))


# -----------------------------------------------------------------------------
# Global options
# -----------------------------------------------------------------------------


def _version_callback(value: bool) -> None:
    if value:
        print(f"opsystk {__version__} (format {FORMAT_VERSION})")
        raise typer.Exit()


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log at DEBUG level")] = False,
    version: Annotated[
        Optional[bool],
        typer.Option("--version", callback=_version_callback, is_eager=True, help="Show versions and exit"),
    ] = None,
) -> None:
    """Operator systems: cones, duals, quotients and tensor products with checkable certificates."""
    setup_logging(verbose)


# -----------------------------------------------------------------------------
# Documents
# -----------------------------------------------------------------------------


@app.command()
def validate(
    path: Annotated[Path, typer.Argument(help="System, map or element JSON file")],
    system_ref: Annotated[
        Optional[str],
        typer.Option("--system", "-s", help="System of an element document"),
    ] = None,
    use_json: JsonOpt = False,
) -> None:
    """Parse a document and check it re-serializes to identical bytes."""
    with guarded(use_json):
        text = _read_text(path)
        doc = loads(text, str(path))
        if not isinstance(doc, dict):
            raise InputError(f"{path}: expected a JSON object")
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported format_version {version!r}", suggestion=f"Expected '{FORMAT_VERSION}'")
        kind = doc.get("type", "system")
        if kind == "system":
            again = system_to_doc(system_from_doc(doc))
        elif kind == "map":
            again = map_to_doc(map_from_doc(doc))
        elif kind == "element":
            if system_ref is None:
                raise InputError("validating an element needs --system")
            again = element_to_doc(element_from_doc(doc, load_system(system_ref)))
        else:
            raise InputError(f"{path}: unknown document type '{kind}'")
        identical = dumps(again, pretty=True) + "\n" == text
        result = {"path": str(path), "type": kind, "name": again.get("name", again.get("system")), "round_trip": identical}
        if _human(use_json):
            format_mapping(result, title="validate")
        else:
            print(format_json(result))
        raise typer.Exit(0 if identical else 1)


@app.command("canonical")
def canonical_cmd(
    name: Annotated[Optional[str], typer.Argument(help="Canonical system (or map with --map) name")] = None,
    is_map: Annotated[bool, typer.Option("--map", help="Look up a canonical map instead of a system")] = False,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Build a named system or map; without a name, list the known names."""
    with guarded(use_json):
        if name is None:
            names = {"systems": list(SYSTEM_NAMES), "maps": list(MAP_NAMES)}
            if _human(use_json):
                format_mapping({k: ", ".join(v) for k, v in names.items()}, title="canonical")
            else:
                print(format_json(names))
            return
        if is_map:
            emit_map(canonical_map(name), use_json, json_out)
        else:
            emit_system(canonical(name), use_json, json_out)


# -----------------------------------------------------------------------------
# Cone and map queries
# -----------------------------------------------------------------------------


@app.command()
def cone(
    system_ref: SystemOpt,
    element: ElementOpt,
    tol: TolOpt = DEFAULT_TOL,
    hier_level: HierOpt = None,
    budget: BudgetOpt = DEFAULT_RESTARTS,
    seed: SeedOpt = None,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Decide whether a self-adjoint element lies in the matrix cone of its system."""
    with guarded(use_json):
        _check_tol(tol)
        system = load_system(system_ref)
        u, verdict = decide(load_element(element, system), tol, hier_level, resolve_seed(seed), budget)
        meta = {"command": "cone", "system": system.name, "level": u.level, "tol": tol}
        emit_verdict(verdict, u, f"M_{u.level}({system.name})", use_json, json_out, meta)


@app.command()
def norm(
    system_ref: SystemOpt,
    element: ElementOpt,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Bracket the canonical operator-system norm of an element."""
    with guarded(use_json):
        _check_tol(tol)
        system = load_system(system_ref)
        u = load_element(element, system)
        bounds = norm_bounds(u, tol)
        data = {"lower": bounds.lower, "upper": bounds.upper, "value": bounds.value, "steps": bounds.steps}
        emit_data(data, f"norm in M_{u.level}({system.name})", use_json, json_out, {"command": "norm", "tol": tol})


@app.command()
def cpcheck(
    map_ref: MapOpt,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Decide complete positivity of a map."""
    with guarded(use_json):
        _check_tol(tol)
        phi = load_map(map_ref)
        verdict = cp_check(phi, tol)
        meta = {"command": "cpcheck", "map": phi.name, "tol": tol}
        emit_verdict(verdict, phi, f"cp({phi.name})", use_json, json_out, meta)


@app.command()
def kpos(
    map_ref: MapOpt,
    level: Annotated[int, typer.Option("--level", "-k", min=1, help="Amplification level k")] = 2,
    budget: BudgetOpt = DEFAULT_RESTARTS,
    seed: SeedOpt = None,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Search for a witness that a map is not k-positive."""
    with guarded(use_json):
        _check_tol(tol)
        phi = load_map(map_ref)
        run_seed = resolve_seed(seed)
        verdict = kpos_refute(phi, level, budget=budget, seed=run_seed, tol=tol)
        meta = {"command": "kpos", "map": phi.name, "k": level, "budget": budget, "seed": run_seed, "tol": tol}
        emit_verdict(verdict, phi, f"{level}-pos({phi.name})", use_json, json_out, meta)


# -----------------------------------------------------------------------------
# Constructions
# -----------------------------------------------------------------------------


@app.command()
def dual(
    system_ref: Annotated[Optional[str], typer.Option("--system", "-s", help="System JSON file or canonical name")] = None,
    map_ref: Annotated[Optional[str], typer.Option("--map", "-m", help="Map JSON file or canonical map name")] = None,
    name: NameOpt = None,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Dual of a system (unit = its faithful state) or of a map."""
    with guarded(use_json):
        if (system_ref is None) == (map_ref is None):
            raise InputError("pass exactly one of --system and --map")
        if system_ref is not None:
            emit_system(dual_system(load_system(system_ref), name=name), use_json, json_out)
        else:
            emit_map(dual_map(load_map(map_ref)), use_json, json_out)


@app.command()
def quotient(
    system_ref: SystemOpt,
    kernel: Annotated[Path, typer.Option("--kernel", "-k", help="Subspace JSON: {generators: [...]}")],
    tol: TolOpt = DEFAULT_TOL,
    name: NameOpt = None,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Quotient of a system by a null subspace."""
    with guarded(use_json):
        _check_tol(tol)
        parent = load_system(system_ref)
        sub = subspace_from_doc(read_document(kernel), parent)
        emit_system(quotient_system(parent, sub, tol, name=name), use_json, json_out)


@app.command("coproduct")
def coproduct_cmd(
    left: Annotated[str, typer.Option("--left", help="First summand (file or canonical name)")],
    right: Annotated[str, typer.Option("--right", help="Second summand (file or canonical name)")],
    tol: TolOpt = DEFAULT_TOL,
    name: NameOpt = None,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Coproduct of two systems amalgamated over their units."""
    with guarded(use_json):
        _check_tol(tol)
        emit_system(coproduct(load_system(left), load_system(right), tol, name=name), use_json, json_out)


@app.command()
def tensor(
    left: Annotated[str, typer.Option("--left", help="First factor (file or canonical name)")],
    right: Annotated[str, typer.Option("--right", help="Second factor (file or canonical name)")],
    kind: Annotated[str, typer.Option("--kind", help="min or max")] = "min",
    element: Annotated[Optional[Path], typer.Option("--element", "-e", help="Element to decide")] = None,
    hier_level: HierOpt = None,
    force_hierarchy: Annotated[bool, typer.Option("--force-hierarchy", help="Skip the exact max-cone paths")] = False,
    budget: BudgetOpt = DEFAULT_RESTARTS,
    seed: SeedOpt = None,
    tol: TolOpt = DEFAULT_TOL,
    name: NameOpt = None,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Build a min or max tensor product, and optionally decide an element of it."""
    with guarded(use_json):
        _check_tol(tol)
        run_seed = resolve_seed(seed)
        s, t = load_system(left), load_system(right)
        level = hier_level or 2
        if kind == "min":
            system = tensor_min(s, t, name=name, hier_level=level, seed=run_seed)
        elif kind == "max":
            system = tensor_max(s, t, name=name, hier_level=level, seed=run_seed, force_hierarchy=force_hierarchy)
        else:
            raise InputError(f"--kind must be 'min' or 'max', got '{kind}'")
        if element is None:
            emit_system(system, use_json, json_out)
            return
        u, verdict = decide(load_element(element, system), tol, level, run_seed, budget)
        meta = {"command": "tensor", "system": system.name, "exactness": system.params["exactness"], "tol": tol}
        emit_verdict(verdict, u, f"M_{u.level}({system.name})", use_json, json_out, meta)


def _k_command(
    builder: Any,
    command: str,
    system_ref: str,
    k: int,
    element: Path | None,
    budget: int,
    seed: int | None,
    tol: float,
    json_out: Path | None,
    use_json: bool,
) -> None:
    with guarded(use_json):
        _check_tol(tol)
        system = builder(load_system(system_ref), k)
        if element is None:
            emit_system(system, use_json, json_out)
            return
        u, verdict = decide(load_element(element, system), tol, seed=resolve_seed(seed), budget=budget)
        meta = {"command": command, "system": system.name, "k": k, "tol": tol}
        emit_verdict(verdict, u, f"M_{u.level}({system.name})", use_json, json_out, meta)


@app.command()
def omin(
    system_ref: SystemOpt,
    k: Annotated[int, typer.Option("--k", min=1, help="Level up to which the structure agrees")],
    element: Annotated[Optional[Path], typer.Option("--element", "-e", help="Element to decide")] = None,
    budget: BudgetOpt = DEFAULT_RESTARTS,
    seed: SeedOpt = None,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """OMIN_k structure of a concrete system, and optionally decide an element."""
    _k_command(omin_system, "omin", system_ref, k, element, budget, seed, tol, json_out, use_json)


@app.command()
def omax(
    system_ref: SystemOpt,
    k: Annotated[int, typer.Option("--k", min=1, help="Level up to which the structure agrees")],
    element: Annotated[Optional[Path], typer.Option("--element", "-e", help="Element to decide")] = None,
    budget: BudgetOpt = DEFAULT_RESTARTS,
    seed: SeedOpt = None,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """OMAX_k structure of a concrete system, and optionally decide an element."""
    _k_command(omax_system, "omax", system_ref, k, element, budget, seed, tol, json_out, use_json)


@app.command()
def numrange(
    system_ref: SystemOpt,
    query: Annotated[Path, typer.Option("--query", "-q", help="JSON with x and optionally target")],
    boundary: Annotated[Optional[int], typer.Option("--boundary", min=3, help="Sample w_1(x) on this many directions")] = None,
    csv_out: Annotated[Optional[Path], typer.Option("--csv", help="Write the sampled boundary as CSV")] = None,
    tol: TolOpt = DEFAULT_TOL,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Matricial numerical range: membership of a target and boundary sampling."""
    with guarded(use_json):
        _check_tol(tol)
        system = load_system(system_ref)
        doc = read_document(query)
        points = None
        if boundary is not None:
            points = numerical_range_boundary(system, read_matrix(doc, "x", "query"), boundary, tol)
            if csv_out is not None:
                csv_out.write_text(format_boundary_csv(points))
        if isinstance(doc, dict) and "target" in doc:
            q = query_from_doc(doc, system)
            if points is not None and _human(use_json):
                format_boundary_table(points)
            verdict = numerical_range_member(q, tol)
            meta = {"command": "numrange", "system": system.name, "level": q.n, "tol": tol}
            emit_verdict(verdict, q, f"w_{q.n}(x)", use_json, json_out, meta)
        if points is None:
            raise InputError("query has no 'target'", suggestion="Add a target matrix or pass --boundary N")
        meta = {"command": "numrange", "system": system.name, "directions": boundary}
        _write(json_out, format_json({"boundary": points}, meta, pretty=True))
        if _human(use_json):
            format_boundary_table(points)
        else:
            print(format_json({"boundary": points}, meta))


# -----------------------------------------------------------------------------
# Suites
# -----------------------------------------------------------------------------


@app.command("suite")
def suite_cmd(
    name: Annotated[str, typer.Argument(help="Suite name, or 'all'")],
    seed: SeedOpt = None,
    budget: Annotated[Optional[int], typer.Option("--budget", min=1, help="Number of checks")] = None,
    show_all: Annotated[bool, typer.Option("--all", help="List passing checks too")] = False,
    json_out: JsonOutOpt = None,
    use_json: JsonOpt = False,
) -> None:
    """Run a property suite; exits 0 on pass, 1 on fail, 2 when undecided."""
    with guarded(use_json):
        names = suites.suite_names() if name == "all" else [suites.get_suite(name).name]
        run_seed = resolve_seed(seed)
        reports = [suites.run_suite(n, seed=run_seed, budget=budget) for n in names]
        payload: Any = reports[0].to_dict() if len(reports) == 1 else {"suites": [r.to_dict() for r in reports]}
        _write(json_out, format_json(payload, pretty=True))
        if _human(use_json):
            for report in reports:
                format_suite_table(report, show_all)
        else:
            print(format_json(payload))
        statuses = {r.status.value for r in reports}
        worst = next(s for s in ("fail", "undecided", "pass") if s in statuses)
        raise typer.Exit(STATUS_EXIT[worst])


if __name__ == "__main__":
    app()
