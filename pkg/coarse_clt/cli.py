#!/usr/bin/env python3

import csv
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, List, Optional, Sequence

import click
import orjson
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from coarse_clt.config import settings
from coarse_clt.core.documents import load_graph_structure
from coarse_clt.core.graph import GraphStructure
from coarse_clt.core.groups import format_word
from coarse_clt.core.markov import (
    first_return_measure,
    parry_chain,
    return_time_identities,
    tv_counting_vs_markov,
)
from coarse_clt.core.spectral import analyze, eigen_residuals
from coarse_clt.exceptions import (
    CoarseCltException,
    ExperimentException,
    MarkovException,
    VerificationFailedException,
    handle_exception,
)
from coarse_clt.schemas.experiment import ExperimentConfig
from coarse_clt.schemas.reports import (
    AnalysisReport,
    ComponentSummary,
    FellowTravelerSummary,
    LoopEntry,
    LoopsReport,
    ReturnTimeReport,
    RunManifest,
    TvEntry,
    TvReport,
    VerificationReport,
)
from coarse_clt.services.clt_harness import SampleRow, run_experiment
from coarse_clt.services.combings import combing_document, combing_for, fellow_traveler_constant
from coarse_clt.services.sampler import paths_from_matrix, sample_sphere_block
from coarse_clt.services.verification import run_verification
from coarse_clt.utils.serialization import dumps, sha256_digest, write_bytes

console = Console(stderr=True)
logger = logging.getLogger(__name__)

CSV_HEADER = ["index", "length", "observable", "normalized"]


def _fail(e: CoarseCltException) -> None:
    raise click.exceptions.Exit(handle_exception(e, console))


def _emit(model: Any, output: Optional[str], rounded: bool = True) -> Optional[str]:
    """Write JSON to the output file, or to standard output."""
    data = dumps(model, rounded=rounded)
    if output is None:
        click.echo(data.decode(), nl=False)
        return None
    try:
        write_bytes(output, data)
    except OSError as e:
        raise CoarseCltException(f"cannot write {output}: {e}")
    console.print(f"[green]Wrote {output}[/green]")
    return output


def _split(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


@click.group()
@click.version_option(version=settings.VERSION, prog_name=settings.PROJECT_NAME)
@click.option(
    "--log-level",
    default=settings.LOG_LEVEL,
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logging level",
)
def cli(log_level):
    """Growth, Parry measures and central limit experiments for geodesic automata."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@cli.command(name="analyze")
@click.argument("automaton", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", default=None, help="Write the report to this file")
def analyze_cmd(automaton, output):
    """Spectral and component report of an automaton document."""
    try:
        _emit(_analyze(automaton), output)
    except CoarseCltException as e:
        _fail(e)


def _analyze(automaton: str) -> AnalysisReport:
    structure = load_graph_structure(automaton)
    data = analyze(structure)
    report = data.components
    stationary = residuals = None
    if data.report.semisimple:
        stationary = parry_chain(structure, data).pi.tolist()
    if data.rho is not None:
        residuals = list(eigen_residuals(structure, data))
    return AnalysisReport(
        name=structure.name,
        vertices=structure.num_vertices,
        edges=len(structure.edges),
        initial=structure.initial_vertex,
        group=structure.group.kind,
        growth_rate=data.lam,
        diagnosis=data.label,
        period=data.period,
        window_growth=data.report.window_growth,
        growth_vs_n5=data.report.growth_vs_n5,
        rho=data.rho.tolist() if data.rho is not None else None,
        u=data.u.tolist() if data.u is not None else None,
        stationary=stationary,
        eigen_residuals=residuals,
        components=[
            ComponentSummary(
                vertices=sorted(c.vertices),
                growth_rate=c.growth_rate,
                period=c.period,
                maximal=c.maximal,
            )
            for c in report.components
        ],
        large_growth=sorted(report.large_growth),
        small_growth=sorted(report.small_growth),
        note=data.report.note,
    )


@cli.command()
@click.option("--automaton", "-a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--length", "-n", required=True, type=click.IntRange(min=0), help="Path length")
@click.option("--count", "-c", default=10, show_default=True, type=click.IntRange(min=0))
@click.option("--seed", required=True, type=int, help="Master seed")
@click.option(
    "--format", "fmt", default="words", type=click.Choice(["words", "edges"]), show_default=True
)
@click.option("--jobs", "-j", default=None, type=click.IntRange(min=1), help="Worker threads")
@click.option("--output", "-o", default=None, help="Write one path per line to this file")
def sample(automaton, length, count, seed, fmt, jobs, output):
    """Uniform samples from the sphere of accepted paths of a given length."""
    try:
        lines = _sample(automaton, length, count, seed, fmt, jobs)
        text = "".join(f"{line}\n" for line in lines)
        if output is None:
            click.echo(text, nl=False)
        else:
            try:
                Path(output).write_text(text)
            except OSError as e:
                raise CoarseCltException(f"cannot write {output}: {e}")
            console.print(f"[green]Wrote {count} paths to {output}[/green]")
    except CoarseCltException as e:
        _fail(e)


def _sample(automaton: str, length: int, count: int, seed: int, fmt: str, jobs: Optional[int]) -> List[str]:
    structure = load_graph_structure(automaton)
    edges = sample_sphere_block(structure, length, count, seed, jobs=jobs)
    if fmt == "edges":
        return [" ".join(str(int(i)) for i in row) for row in edges]
    return [format_word(path.word()) for path in paths_from_matrix(structure, edges)]


@cli.command()
@click.argument("automaton", type=click.Path(exists=True, dir_okay=False))
@click.option("--vertex", "-v", default=None, type=int, help="Vertex in a maximal component")
@click.option("--cutoff", "-L", default=12, show_default=True, type=click.IntRange(min=1))
@click.option("--output", "-o", default=None)
def loops(automaton, vertex, cutoff, output):
    """Prime loops with first-return probabilities and the return-time identities."""
    try:
        _emit(_loops(automaton, vertex, cutoff), output)
    except CoarseCltException as e:
        _fail(e)


def _default_loop_vertex(structure: GraphStructure, pi: Sequence[float]) -> int:
    for v in structure.vertices:
        if pi[v] > 0.0:
            return v
    raise MarkovException("no vertex carries stationary mass")


def _loops(automaton: str, vertex: Optional[int], cutoff: int) -> LoopsReport:
    structure = load_graph_structure(automaton)
    chain = parry_chain(structure, analyze(structure))
    if vertex is None:
        vertex = _default_loop_vertex(structure, chain.pi)
    measure = first_return_measure(chain, vertex, cutoff)
    identities = return_time_identities(chain, vertex, cutoff)
    return LoopsReport(
        vertex=vertex,
        cutoff=cutoff,
        loops=[
            LoopEntry(
                edges=list(loop.edge_indices),
                word=format_word(loop.word()),
                length=loop.length,
                probability=prob,
            )
            for loop, prob in measure.loops
        ],
        captured_mass=measure.captured_mass,
        identities=ReturnTimeReport(
            return_time=identities.return_time,
            inverse_pi=identities.inverse_pi,
            captured_mass=identities.captured_mass,
            return_residual=identities.return_residual,
            visits=list(identities.visits),
            visit_residuals=list(identities.visit_residuals),
            max_visit_residual=identities.max_visit_residual,
        ),
    )


@cli.command()
@click.argument("automaton", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--n", "lengths", multiple=True, type=click.IntRange(min=1), help="Path length (repeatable)"
)
@click.option("--output", "-o", default=None)
def tv(automaton, lengths, output):
    """Exact total variation between counting and Parry measures on the middle subpath."""
    try:
        _emit(_tv(automaton, lengths or (4, 6, 8, 10, 12)), output)
    except CoarseCltException as e:
        _fail(e)


def _tv(automaton: str, lengths: Sequence[int]) -> TvReport:
    structure = load_graph_structure(automaton)
    chain = parry_chain(structure, analyze(structure))
    entries = []
    for n in lengths:
        result = tv_counting_vs_markov(structure, chain, n)
        entries.append(
            TvEntry(n=result.n, trim=result.trim, middle_length=result.middle_length, value=result.value)
        )
    return TvReport(entries=entries)


@cli.command()
@click.option("--free", type=click.IntRange(min=2), default=None, help="Free group rank")
@click.option("--raag", default=None, help="Right-angled Artin generators, comma separated")
@click.option("--racg", default=None, help="Right-angled Coxeter generators, comma separated")
@click.option("--commute", multiple=True, help="Commuting pair such as a-b (repeatable)")
@click.option(
    "--fellow-traveler",
    "fellow_maxlen",
    type=click.IntRange(min=0),
    default=None,
    help="Also check the fellow-traveler constant up to this length",
)
@click.option("--bounded", default=None, help="Bounded elements for the check, comma separated")
@click.option("--output", "-o", default=None)
def comb(free, raag, racg, commute, fellow_maxlen, bounded, output):
    """Emit a built-in geodesic combing as an automaton document."""
    try:
        pairs = []
        for pair in commute:
            ends = [x.strip() for x in pair.split("-")]
            if len(ends) != 2 or not all(ends):
                raise click.BadParameter(f"expected a pair like a-b, got '{pair}'", param_hint="--commute")
            pairs.append(tuple(ends))
        structure = combing_for(
            free=free,
            raag=_split(raag) if raag is not None else None,
            racg=_split(racg) if racg is not None else None,
            commutations=pairs,
        )
        _emit(combing_document(structure), output, rounded=False)
        if fellow_maxlen is not None:
            summary = _fellow_traveler(structure, fellow_maxlen, bounded)
            console.print(
                f"fellow-traveler constant {summary.constant}, length defect "
                f"{summary.length_defect} over {summary.paths_checked} paths (maxlen {summary.maxlen})"
            )
    except CoarseCltException as e:
        _fail(e)


def _fellow_traveler(structure: GraphStructure, maxlen: int, bounded: Optional[str]) -> FellowTravelerSummary:
    elements = _split(bounded) if bounded else ["1", structure.group.letters[0]]
    report = fellow_traveler_constant(structure, elements, maxlen)
    return FellowTravelerSummary(
        constant=report.constant,
        length_defect=report.length_defect,
        maxlen=report.maxlen,
        elements=[format_word(b) or "1" for b in report.elements],
        paths_checked=report.paths_checked,
        witness=[format_word(w) or "1" for w in report.witness] if report.witness else None,
    )


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", required=True, type=int, help="Master seed, overrides the config")
@click.option("--jobs", "-j", default=None, type=click.IntRange(min=1), help="Worker threads")
@click.option("--output", "-o", default=None, help="Write the report to this file")
@click.option("--samples-csv", default=None, help="Write normalized sample values as CSV")
@click.option("--manifest", default=None, help="Write a run manifest as JSON")
def clt(config_path, seed, jobs, output, samples_csv, manifest):
    """Run a CLT experiment described by a JSON or YAML config."""
    try:
        _clt(config_path, seed, jobs, output, samples_csv, manifest)
    except CoarseCltException as e:
        _fail(e)


def load_experiment_config(path: Path) -> ExperimentConfig:
    raw = path.read_bytes()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(raw)
        else:
            data = orjson.loads(raw)
    except (yaml.YAMLError, orjson.JSONDecodeError) as e:
        raise ExperimentException("config", f"cannot parse {path}: {e}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ExperimentException("config", f"invalid field '{location}': {first['msg']}")


def _clt(
    config_path: str,
    seed: int,
    jobs: Optional[int],
    output: Optional[str],
    samples_csv: Optional[str],
    manifest: Optional[str],
) -> None:
    started_at = datetime.now(timezone.utc)
    clock = time.perf_counter()
    path = Path(config_path)
    config = load_experiment_config(path)
    inputs = {str(path): sha256_digest(path.read_bytes())}
    if isinstance(config.automaton, str):
        automaton = Path(config.automaton)
        if not automaton.is_absolute():
            automaton = path.parent / automaton
        if automaton.is_file():
            inputs[str(automaton)] = sha256_digest(automaton.read_bytes())

    rows: Optional[List[SampleRow]] = [] if samples_csv else None
    report = run_experiment(config, seed=seed, jobs=jobs, base_dir=path.parent, sample_rows=rows)

    outputs = []
    written = _emit(report, output)
    if written:
        outputs.append(written)
    if samples_csv:
        _write_samples(samples_csv, rows or [])
        outputs.append(samples_csv)
    if manifest:
        resolved = config.model_dump(mode="json", exclude_none=True)
        resolved["seed"] = seed
        record = RunManifest(
            subcommand="clt",
            config=resolved,
            version=settings.VERSION,
            seed=seed,
            inputs=inputs,
            outputs=outputs,
            started_at=started_at,
            runtime_seconds=time.perf_counter() - clock,
        )
        write_bytes(manifest, dumps(record, rounded=False))
        console.print(f"[green]Wrote manifest {manifest}[/green]")


def _write_samples(target: str, rows: List[SampleRow]) -> None:
    try:
        with open(target, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for index, length, observable, value in rows:
                writer.writerow([index, length, observable, repr(value)])
    except OSError as e:
        raise CoarseCltException(f"cannot write {target}: {e}")
    logger.info(f"wrote {len(rows)} sample rows to {target}")


@cli.command()
@click.option("--fixtures", is_flag=True, help="Run the desk-scale fixture suite")
@click.option("--output", "-o", default=None, help="Write the JSON report to this file")
def verify(fixtures, output):
    """Run the oracle checks on the built-in fixtures."""
    if not fixtures:
        raise click.UsageError("nothing to verify; pass --fixtures")
    try:
        report = _verify()
        if output is not None:
            _emit(report, output)
        if not report.passed:
            failed = [c.name for c in report.checks if not c.passed]
            raise VerificationFailedException(f"{len(failed)} failing: {', '.join(failed)}")
    except CoarseCltException as e:
        _fail(e)


def _verify() -> VerificationReport:
    report = run_verification()
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        click.echo(f"{status}  {check.name}: {check.detail}")
    return report


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return the exit code instead of exiting."""
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name=settings.PROJECT_NAME,
            standalone_mode=False,
        )
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        console.print("[red]Aborted[/red]")
        return 1
    return result if isinstance(result, int) else 0


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
