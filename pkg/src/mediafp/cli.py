"""Command-line front end.

Commands: ``scan`` walks files and directories and reports a verdict per
file, ``kb validate`` / ``kb list`` inspect a knowledge base, ``selftest``
pushes the labeled corpus through the matcher and fails on any miss.  The
default KB is the data directory bundled with the package, overridable with
--kb or the MEDIAFP_KB environment variable.
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import kb as kb_mod
from . import oracle, report
from .attributes import MediaKind
from .engine import match_image, match_video


def _load_kb(kb_path: str | None) -> kb_mod.KnowledgeBase:
    target = Path(kb_path) if kb_path else kb_mod.default_kb_path()
    if not target.exists():
        raise click.UsageError(f"knowledge base not found: {target}")
    try:
        return kb_mod.load_kb_path(target)
    except kb_mod.KbError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.version_option(package_name="mediafp")
def main() -> None:
    """Trace which instant messengers a photo or video passed through."""


@main.command()
@click.argument("paths", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True, help="Report format.")
@click.option("--kb", "kb_path", type=str, default=None, help="Knowledge base file or directory.")
@click.option("--chains/--no-chains", default=True, show_default=True,
              help="Infer messenger-to-messenger relay hypotheses.")
@click.option("--timestamps", is_flag=True, default=False,
              help="Stamp the report with the generation time.")
def scan(paths: tuple[Path, ...], fmt: str, kb_path: str | None,
         chains: bool, timestamps: bool) -> None:
    """Fingerprint every file under PATHS and report verdicts.

    Exit status: 0 when every file parsed (Unknown verdicts included),
    1 when any file failed to parse, 2 on bad invocation.
    """
    knowledge = _load_kb(kb_path)
    files: list[Path] = []
    for path in paths:
        if path.is_dir():
            files.extend(p for p in path.rglob("*") if p.is_file())
        else:
            files.append(path)
    files.sort(key=str)
    reports = [report.scan_file(path, knowledge, chains=chains) for path in files]
    stamp = datetime.now(timezone.utc).isoformat() if timestamps else None
    click.echo(report.render_report(reports, fmt, stamp), nl=False)
    sys.exit(1 if any(r.error for r in reports) else 0)


@main.group(name="kb")
def kb_group() -> None:
    """Inspect and validate knowledge bases."""


@kb_group.command()
@click.option("--kb", "kb_path", type=str, default=None, help="Knowledge base file or directory.")
def validate(kb_path: str | None) -> None:
    """Load the KB, verify its manifest, and print the validation report."""
    knowledge = _load_kb(kb_path)
    validation = kb_mod.validate_kb(knowledge)
    click.echo(f"{len(knowledge.records)} records, {len(knowledge.originals)} original profiles")
    if knowledge.manifest is not None:
        click.echo("manifest verified: " + ", ".join(f"{k}={v}" for k, v in knowledge.manifest))
    for finding in validation.findings:
        click.echo(f"[{finding.kind}] {finding.message}: {', '.join(finding.record_ids)}")
    click.echo(f"{len(validation.findings)} findings")


@kb_group.command(name="list")
@click.option("--app", default=None, help="Filter by application name.")
@click.option("--os", "os_token", default=None, help="Filter by OS (iOS, Android43, ...).")
@click.option("--kind", type=click.Choice(["image", "video"]), default=None,
              help="Filter by media kind.")
@click.option("--kb", "kb_path", type=str, default=None, help="Knowledge base file or directory.")
def list_cmd(app: str | None, os_token: str | None, kind: str | None, kb_path: str | None) -> None:
    """Print fingerprint records, optionally filtered."""
    knowledge = _load_kb(kb_path)
    try:
        selected = kb_mod.list_records(knowledge, app=app, os=os_token, media_kind=kind)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    for rec in selected:
        hop = f"chain[{rec.nth_app}]" if rec.nth_app else "single"
        tag = "" if rec.distinguishable else "  (indistinguishable)"
        click.echo(f"{rec.record_id}  {rec.media_kind.value}/{hop}  "
                   f"{rec.app} / {rec.os.value} / {rec.quality}{tag}")
    click.echo(f"{len(selected)} records")


def _label_satisfied(entry: oracle.CorpusEntry, verdict) -> bool:
    label = entry.label
    if isinstance(label, oracle.SingleLabel):
        return any(
            c.app == label.app and c.os is label.os and c.quality == label.quality
            for c in verdict.candidates
        )
    return any(
        h.nth_app == label.nth_app and h.nplus1_app == label.nplus1_app and h.os is label.os
        for h in verdict.chain_hypotheses
    )


@main.command()
@click.option("--kb", "kb_path", type=str, default=None, help="Knowledge base file or directory.")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Frozen corpus file to replay instead of regenerating.")
@click.option("--dump-corpus", "dump_path", type=click.Path(path_type=Path), default=None,
              help="Write the generated corpus to this file.")
def selftest(kb_path: str | None, corpus_path: Path | None, dump_path: Path | None) -> None:
    """Replay the labeled corpus through the matcher; exit 0 only on 100% hits.

    With the bundled KB the frozen corpus ships alongside the data files and
    is used by default, so edits that drift from it fail here.
    """
    knowledge = _load_kb(kb_path)
    if dump_path is not None:
        dump_path.write_text(oracle.render_corpus(oracle.generate_corpus(knowledge)), encoding="utf-8")
        click.echo(f"corpus written to {dump_path}")
    if corpus_path is not None:
        entries = oracle.parse_corpus(corpus_path.read_text(encoding="utf-8"))
    elif kb_path is None and (kb_mod.default_kb_path() / "corpus.tsv").exists():
        entries = oracle.parse_corpus((kb_mod.default_kb_path() / "corpus.tsv").read_text(encoding="utf-8"))
    else:
        entries = oracle.generate_corpus(knowledge)

    failures = 0
    for entry in entries:
        if entry.media_kind is MediaKind.IMAGE:
            verdict = match_image(entry.attributes, knowledge)
        else:
            verdict = match_video(entry.attributes, knowledge)
        if not _label_satisfied(entry, verdict):
            failures += 1
            click.echo(f"FAIL {entry.record_id}: expected {entry.label.render()}, "
                       f"got outcome {verdict.outcome.value}")
    click.echo(f"{len(entries)} cases, {failures} failures")
    sys.exit(0 if failures == 0 else 1)


if __name__ == "__main__":
    main()
